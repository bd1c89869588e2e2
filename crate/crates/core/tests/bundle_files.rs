use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use camscore::bundle_io::{DEPTH_FILE, GLOBAL_FEATURE_FILE, IMAGE_FILE, MANIFEST_FILE};
use camscore::{load_bundle, save_bundle, BBox, Bundle, Depth, Det, Error, Feature, Image, Source};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn f32_exact(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> f64 {
    rng.gen_range(lo..hi) as f64
}

fn random_bundle(rng: &mut ChaCha8Rng) -> Bundle {
    let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
    let c = *[1, 3].choose(rng).unwrap();
    let pixels = (0..w * h * c).map(|_| rng.gen_range(0..=255u8) as f64 / 255.0).collect();
    let dim = rng.gen_range(1..70);
    let feature = |rng: &mut ChaCha8Rng| loop {
        let v: Vec<f64> = (0..dim).map(|_| f32_exact(rng, -3.0, 3.0)).collect();
        if let Ok(f) = Feature::new(v) {
            return f;
        }
    };
    let labels = ["person", "dog", "a \"quoted\" label", "café", "", "x/y"];
    let detections = (0..rng.gen_range(0..7))
        .map(|_| {
            let x1: f64 = rng.gen_range(0.0..0.9);
            let y1: f64 = rng.gen_range(0.0..0.9);
            let bbox = BBox::new(x1, y1, rng.gen_range(x1 + 1e-6..1.0), rng.gen_range(y1 + 1e-6..1.0)).unwrap();
            Det::new(bbox, *labels.choose(rng).unwrap(), feature(rng), rng.gen()).unwrap()
        })
        .collect();
    let depth = (0..w * h).map(|_| f32_exact(rng, 0.01, 80.0)).collect();
    let mut meta = BTreeMap::new();
    for k in 0..rng.gen_range(0..4) {
        meta.insert(format!("key{k}"), format!("value {}", rng.gen::<u32>()));
    }
    let source = *[Source::Original, Source::Generated, Source::Synthetic].choose(rng).unwrap();
    Bundle::new(
        Image::new(w, h, c, pixels).unwrap(),
        feature(rng),
        detections,
        Depth::new(w, h, depth).unwrap(),
        source,
        meta,
    )
    .unwrap()
}

#[test]
fn two_hundred_random_bundles_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let root = tempfile::tempdir().unwrap();
    for i in 0..200 {
        let b = random_bundle(&mut rng);
        let dir = root.path().join(format!("b{i}"));
        save_bundle(&b, &dir).unwrap();
        let back: Bundle = load_bundle(&dir).unwrap();
        assert_eq!(back, b, "bundle {i}");
    }
}

#[test]
fn saving_twice_gives_identical_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = random_bundle(&mut rng);
    let root = tempfile::tempdir().unwrap();
    save_bundle(&b, root.path().join("a")).unwrap();
    save_bundle(&b, root.path().join("b")).unwrap();
    for name in [MANIFEST_FILE, IMAGE_FILE, GLOBAL_FEATURE_FILE, DEPTH_FILE] {
        assert_eq!(
            fs::read(root.path().join("a").join(name)).unwrap(),
            fs::read(root.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

fn edit_manifest(dir: &Path, f: impl FnOnce(&mut Value)) {
    let path = dir.join(MANIFEST_FILE);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut v);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

fn edit_bytes(path: &Path, f: impl FnOnce(&mut Vec<u8>)) {
    let mut bytes = fs::read(path).unwrap();
    f(&mut bytes);
    fs::write(path, bytes).unwrap();
}

/// Applies corruption `kind` and returns the file the error must name.
fn corrupt(dir: &Path, b: &Bundle, kind: usize, rng: &mut ChaCha8Rng) -> String {
    let n_pix = b.image.data().len();
    match kind {
        0 => {
            edit_bytes(&dir.join(IMAGE_FILE), |v| {
                let i = 17 + rng.gen_range(0..n_pix);
                v[i] ^= 0x5a;
            });
            IMAGE_FILE.into()
        }
        1 => {
            edit_bytes(&dir.join(IMAGE_FILE), |v| v.truncate(v.len() - 1));
            IMAGE_FILE.into()
        }
        2 => {
            edit_bytes(&dir.join(GLOBAL_FEATURE_FILE), |v| v[0] = b'X');
            GLOBAL_FEATURE_FILE.into()
        }
        3 => {
            edit_bytes(&dir.join(DEPTH_FILE), |v| {
                let i = rng.gen_range(0..b.depth.data().len());
                v[13 + 4 * i..17 + 4 * i].copy_from_slice(&(-1.0f32).to_le_bytes());
            });
            DEPTH_FILE.into()
        }
        4 => {
            edit_bytes(&dir.join(DEPTH_FILE), |v| {
                v[13..17].copy_from_slice(&0.0f32.to_le_bytes());
            });
            DEPTH_FILE.into()
        }
        5 => {
            edit_bytes(&dir.join(GLOBAL_FEATURE_FILE), |v| {
                v[9..13].copy_from_slice(&f32::NAN.to_le_bytes());
            });
            GLOBAL_FEATURE_FILE.into()
        }
        6 => {
            fs::write(dir.join(MANIFEST_FILE), "{ not json").unwrap();
            MANIFEST_FILE.into()
        }
        7 => {
            edit_manifest(dir, |v| {
                v["unexpected"] = Value::Bool(true);
            });
            MANIFEST_FILE.into()
        }
        8 => {
            edit_manifest(dir, |v| {
                let w = v["image"]["w"].as_u64().unwrap();
                v["image"]["w"] = (w + 1).into();
            });
            // Caught when the raster header disagrees with the manifest.
            IMAGE_FILE.into()
        }
        9 => {
            edit_manifest(dir, |v| {
                v["depth"]["h"] = 0.into();
            });
            DEPTH_FILE.into()
        }
        10 => {
            fs::remove_file(dir.join(DEPTH_FILE)).unwrap();
            DEPTH_FILE.into()
        }
        11 => {
            edit_manifest(dir, |v| {
                v["image"]["file"] = "../escape.raw".into();
            });
            MANIFEST_FILE.into()
        }
        12 => {
            edit_manifest(dir, |v| {
                v["global_feature"]["dim"] = 0.into();
            });
            MANIFEST_FILE.into()
        }
        13 => {
            edit_manifest(dir, |v| {
                v["version"] = 7.into();
            });
            MANIFEST_FILE.into()
        }
        14 => {
            edit_manifest(dir, |v| {
                v["image"]["c"] = 2.into();
            });
            IMAGE_FILE.into()
        }
        // The remaining kinds need at least one detection; callers ensure it.
        15 => {
            edit_manifest(dir, |v| {
                v["detections"][0]["box"] = serde_json::json!([0.6, 0.1, 0.4, 0.5]);
            });
            MANIFEST_FILE.into()
        }
        16 => {
            edit_manifest(dir, |v| {
                v["detections"][0]["confidence"] = 1.5.into();
            });
            MANIFEST_FILE.into()
        }
        17 => {
            let name = "det_000.f32";
            edit_bytes(&dir.join(name), |v| {
                let dim = u32::from_le_bytes(v[5..9].try_into().unwrap());
                v[5..9].copy_from_slice(&(dim + 1).to_le_bytes());
                v.extend_from_slice(&1.0f32.to_le_bytes());
            });
            name.into()
        }
        18 => {
            let name = "det_000.f32";
            edit_bytes(&dir.join(name), |v| {
                for b in &mut v[9..] {
                    *b = 0;
                }
            });
            name.into()
        }
        _ => {
            edit_manifest(dir, |v| {
                v["detections"][0]["box"] = serde_json::json!([0.1, 0.1, 1.5, 0.5]);
            });
            MANIFEST_FILE.into()
        }
    }
}

const KINDS: usize = 20;
const NEED_DETECTION: usize = 15;

#[test]
fn hundred_corruptions_are_rejected_with_the_file_named() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let root = tempfile::tempdir().unwrap();
    for case in 0..100 {
        let kind = case % KINDS;
        let b = loop {
            let b = random_bundle(&mut rng);
            if kind < NEED_DETECTION || !b.detections.is_empty() {
                break b;
            }
        };
        let dir = root.path().join(format!("c{case}"));
        save_bundle(&b, &dir).unwrap();
        let file = corrupt(&dir, &b, kind, &mut rng);
        let err = load_bundle::<f64>(&dir).expect_err(&format!("case {case} kind {kind} loaded"));
        let msg = err.to_string();
        assert!(msg.contains(&file), "case {case} kind {kind}: {msg}");
        assert!(
            matches!(err, Error::Bundle { .. } | Error::Io { .. }),
            "case {case} kind {kind}: {err:?}"
        );
    }
}

#[test]
fn error_messages_name_the_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b = random_bundle(&mut rng);
    let root = tempfile::tempdir().unwrap();
    save_bundle(&b, root.path()).unwrap();
    corrupt(root.path(), &b, 3, &mut rng);
    let msg = load_bundle::<f64>(root.path()).unwrap_err().to_string();
    assert!(msg.contains("non-positive depth"), "{msg}");
    assert!(msg.contains("values["), "{msg}");
}
