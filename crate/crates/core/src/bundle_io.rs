//! On-disk bundle directory format.
//!
//! ```text
//! manifest.json   version, source, file references, boxes, meta
//! image.raw       "CAMR1" u32 w h c, then w*h*c u8 (row-major, interleaved)
//! global.f32      "CAMF1" u32 dim, then dim f32
//! det_NNN.f32     same layout as global.f32, one per detection
//! depth.f32       "CAMD1" u32 w h, then w*h f32
//! ```
//! Integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{BoundingBox, DepthMap, Detection, FeatureVector, ImageRaster, PerceptionBundle, Source};
use crate::error::{Error, Result};
use crate::numfmt::Precise;
use crate::scalar::Scalar;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGE_FILE: &str = "image.raw";
pub const GLOBAL_FEATURE_FILE: &str = "global.f32";
pub const DEPTH_FILE: &str = "depth.f32";

const RASTER_MAGIC: &[u8; 5] = b"CAMR1";
const FEATURE_MAGIC: &[u8; 5] = b"CAMF1";
const DEPTH_MAGIC: &[u8; 5] = b"CAMD1";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    source: Source,
    image: ImageEntry,
    global_feature: FeatureEntry,
    detections: Vec<DetectionEntry>,
    depth: DepthEntry,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageEntry {
    w: u32,
    h: u32,
    c: u32,
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureEntry {
    dim: u32,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionEntry {
    #[serde(rename = "box")]
    bbox: [Precise; 4],
    label: String,
    confidence: Precise,
    feature_file: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DepthEntry {
    w: u32,
    h: u32,
    file: String,
}

/// Quantize an intensity in `[0,1]` to 8 bits.
pub fn intensity_to_u8<T: Scalar>(v: T) -> u8 {
    (v.max(T::zero()).min(T::one()) * T::lit(255.0))
        .round()
        .to_u8()
        .unwrap_or(0)
}

pub fn u8_to_intensity<T: Scalar>(b: u8) -> T {
    T::from_u8(b).unwrap() / T::lit(255.0)
}

pub fn encode_raster<T: Scalar>(img: &ImageRaster<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + img.data().len());
    out.extend_from_slice(RASTER_MAGIC);
    for v in [img.width(), img.height(), img.channels()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend(img.data().iter().map(|v| intensity_to_u8(*v)));
    out
}

pub fn encode_feature<T: Scalar>(f: &FeatureVector<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 4 * f.dim());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(f.dim() as u32).to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    out
}

pub fn encode_depth<T: Scalar>(d: &DepthMap<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 4 * d.data().len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(d.width() as u32).to_le_bytes());
    out.extend_from_slice(&(d.height() as u32).to_le_bytes());
    for v in d.data() {
        out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    out
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `bundle` into directory `dir`, creating it if needed.
pub fn save_bundle<T: Scalar>(bundle: &PerceptionBundle<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let raster = encode_raster(&bundle.image);
    write_file(&dir.join(IMAGE_FILE), &raster)?;
    write_file(&dir.join(GLOBAL_FEATURE_FILE), &encode_feature(&bundle.global_feature))?;
    write_file(&dir.join(DEPTH_FILE), &encode_depth(&bundle.depth))?;

    let mut detections = Vec::with_capacity(bundle.detections.len());
    for (i, det) in bundle.detections.iter().enumerate() {
        let file = format!("det_{i:03}.f32");
        write_file(&dir.join(&file), &encode_feature(&det.feature))?;
        let b = det.bbox;
        detections.push(DetectionEntry {
            bbox: [b.x1, b.y1, b.x2, b.y2].map(|v| Precise(v.to_f64_lossy())),
            label: det.label.clone(),
            confidence: Precise(det.confidence.to_f64_lossy()),
            feature_file: file,
        });
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        source: bundle.source,
        image: ImageEntry {
            w: bundle.image.width() as u32,
            h: bundle.image.height() as u32,
            c: bundle.image.channels() as u32,
            file: IMAGE_FILE.to_string(),
            sha256: sha256_hex(&raster),
        },
        global_feature: FeatureEntry {
            dim: bundle.feature_dim() as u32,
            file: GLOBAL_FEATURE_FILE.to_string(),
        },
        detections,
        depth: DepthEntry {
            w: bundle.depth.width() as u32,
            h: bundle.depth.height() as u32,
            file: DEPTH_FILE.to_string(),
        },
        meta: bundle.meta.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::bundle(dir.join(MANIFEST_FILE), "manifest", e.to_string()))?;
    json.push('\n');
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

/// Little-endian cursor over a binary payload with a 5-byte magic.
struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8], magic: &[u8; 5]) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..5] != magic {
            return Err(Error::bundle(
                path,
                "header",
                format!("expected magic {:?}", String::from_utf8_lossy(magic)),
            ));
        }
        Ok(Self { path, bytes, pos: 5 })
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::bundle(self.path, field, "truncated header"))?;
        self.pos = end;
        Ok(u32::from_le_bytes(chunk.try_into().unwrap()))
    }

    fn rest(&self, expected_len: usize, field: &str) -> Result<&'a [u8]> {
        let rest = &self.bytes[self.pos..];
        if rest.len() != expected_len {
            return Err(Error::bundle(
                self.path,
                field,
                format!("payload is {} bytes, expected {expected_len}", rest.len()),
            ));
        }
        Ok(rest)
    }

    fn f32s(&self, count: usize, field: &str) -> Result<Vec<f32>> {
        let payload = self.rest(count * 4, field)?;
        Ok(payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Referenced files must stay inside the bundle directory.
fn member(dir: &Path, name: &str, field: &str) -> Result<PathBuf> {
    let p = Path::new(name);
    if name.is_empty() || p.is_absolute() || p.components().count() != 1 {
        return Err(Error::bundle(
            dir.join(MANIFEST_FILE),
            field,
            format!("file name {name:?} must be a plain name inside the bundle"),
        ));
    }
    Ok(dir.join(p))
}

fn load_feature<T: Scalar>(path: &Path, dim: usize) -> Result<FeatureVector<T>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes, FEATURE_MAGIC)?;
    let file_dim = r.u32("dim")? as usize;
    if file_dim != dim {
        return Err(Error::bundle(
            path,
            "dim",
            format!("file declares dim {file_dim}, manifest {dim}"),
        ));
    }
    let values: Vec<T> = r.f32s(dim, "values")?.into_iter().map(|v| T::from_f32(v).unwrap()).collect();
    FeatureVector::new(values).map_err(|e| Error::bundle(path, "values", e.to_string()))
}

/// Reads and validates a bundle directory.
pub fn load_bundle<T: Scalar>(dir: impl AsRef<Path>) -> Result<PerceptionBundle<T>> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Bundle {
        file: manifest_path.clone(),
        field: "manifest".into(),
        message: e.to_string(),
    })?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::bundle(
            &manifest_path,
            "version",
            format!("unsupported version {}", m.version),
        ));
    }

    // image
    let image_path = member(dir, &m.image.file, "image.file")?;
    let raw = read_file(&image_path)?;
    if sha256_hex(&raw) != m.image.sha256.to_ascii_lowercase() {
        return Err(Error::bundle(&image_path, "sha256", "checksum mismatch"));
    }
    let mut r = Reader::new(&image_path, &raw, RASTER_MAGIC)?;
    let (w, h, c) = (r.u32("w")?, r.u32("h")?, r.u32("c")?);
    if (w, h, c) != (m.image.w, m.image.h, m.image.c) {
        return Err(Error::bundle(
            &image_path,
            "w/h/c",
            format!(
                "file declares {w}x{h}x{c}, manifest {}x{}x{}",
                m.image.w, m.image.h, m.image.c
            ),
        ));
    }
    let (w, h, c) = (w as usize, h as usize, c as usize);
    let payload = r.rest(w * h * c, "pixels")?;
    let image = ImageRaster::new(w, h, c, payload.iter().map(|b| u8_to_intensity(*b)).collect())
        .map_err(|e| Error::bundle(&image_path, "pixels", e.to_string()))?;

    // global feature
    let dim = m.global_feature.dim as usize;
    if dim == 0 {
        return Err(Error::bundle(&manifest_path, "global_feature.dim", "must be positive"));
    }
    let global_feature = load_feature(&member(dir, &m.global_feature.file, "global_feature.file")?, dim)?;

    // detections
    let mut detections = Vec::with_capacity(m.detections.len());
    for (i, d) in m.detections.iter().enumerate() {
        let field = |f: &str| format!("detections[{i}].{f}");
        let [x1, y1, x2, y2] = d.bbox.map(|p| T::from_f64(p.0).unwrap_or_else(T::nan));
        let bbox = BoundingBox::new(x1, y1, x2, y2)
            .map_err(|e| Error::bundle(&manifest_path, field("box"), e.to_string()))?;
        let feature = load_feature(&member(dir, &d.feature_file, &field("feature_file"))?, dim)?;
        let det = Detection::new(bbox, d.label.clone(), feature, T::from_f64(d.confidence.0).unwrap())
            .map_err(|e| Error::bundle(&manifest_path, field("confidence"), e.to_string()))?;
        detections.push(det);
    }

    // depth
    let depth_path = member(dir, &m.depth.file, "depth.file")?;
    let bytes = read_file(&depth_path)?;
    let mut r = Reader::new(&depth_path, &bytes, DEPTH_MAGIC)?;
    let (dw, dh) = (r.u32("w")?, r.u32("h")?);
    if (dw, dh) != (m.depth.w, m.depth.h) {
        return Err(Error::bundle(
            &depth_path,
            "w/h",
            format!("file declares {dw}x{dh}, manifest {}x{}", m.depth.w, m.depth.h),
        ));
    }
    if (dw as usize, dh as usize) != (w, h) {
        return Err(Error::bundle(
            &depth_path,
            "w/h",
            format!("depth {dw}x{dh} does not match image {w}x{h}"),
        ));
    }
    let values = r.f32s(w * h, "values")?;
    if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::bundle(
            &depth_path,
            format!("values[{i}]"),
            format!("non-positive depth {}", values[i]),
        ));
    }
    let depth = DepthMap::new(w, h, values.into_iter().map(|v| T::from_f32(v).unwrap()).collect())
        .map_err(|e| Error::bundle(&depth_path, "values", e.to_string()))?;

    PerceptionBundle::new(image, global_feature, detections, depth, m.source, m.meta)
        .map_err(|e| Error::bundle(&manifest_path, "bundle", e.to_string()))
}
