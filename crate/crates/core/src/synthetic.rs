//! Deterministic scene renderer standing in for the generative and
//! perception models.
//!
//! A [`SceneSpec`] lists flat-coloured shapes with normalized boxes and
//! depths. [`render_scene`] rasterizes it back to front and emits exact
//! detections, hash-embedding features and a per-pixel depth map, so that
//! every metric can be exercised without any learned component.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle_io::u8_to_intensity;
use crate::data::{BoundingBox, DepthMap, Detection, FeatureVector, ImageRaster, PerceptionBundle, Source};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Length of every synthetic embedding.
pub const FEATURE_DIM: usize = 64;

/// Background depth is this multiple of the farthest object's depth.
pub const BACKGROUND_DEPTH_FACTOR: f64 = 10.0;

/// Minimum translation applied by [`Perturbation::MoveObject`].
pub const MIN_MOVE: f64 = 0.2;

/// Object colours: the corners of the RGB cube.
pub const PALETTE: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0],
];

const COLOR_LEVELS: f64 = 7.0;
const EMBEDDING_KEY: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Circle, Shape::Square, Shape::Triangle];

    fn id(self) -> u64 {
        match self {
            Shape::Circle => 1,
            Shape::Square => 2,
            Shape::Triangle => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
        }
    }

    /// Whether the normalized point lies inside the shape drawn in `b`.
    /// Circles are inscribed ellipses; triangles have their apex at the top
    /// centre and their base on the bottom edge.
    fn covers(self, b: &[f64; 4], x: f64, y: f64) -> bool {
        let [x1, y1, x2, y2] = *b;
        if x < x1 || x >= x2 || y < y1 || y >= y2 {
            return false;
        }
        let (cx, cy) = ((x1 + x2) / 2.0, (y1 + y2) / 2.0);
        let (hw, hh) = ((x2 - x1) / 2.0, (y2 - y1) / 2.0);
        match self {
            Shape::Square => true,
            Shape::Circle => ((x - cx) / hw).powi(2) + ((y - cy) / hh).powi(2) <= 1.0,
            Shape::Triangle => (x - cx).abs() <= hw * (y - y1) / (y2 - y1),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub shape: Shape,
    pub color: [f64; 3],
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub depth: f64,
}

/// Declarative scene; serialized as `.scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// `(width, height)` in pixels.
    pub canvas: [usize; 2],
    pub objects: Vec<SceneObject>,
    pub background: [f64; 3],
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.canvas;
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput(format!("canvas {w}x{h} must be positive")));
        }
        let unit = |c: &[f64; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        if !unit(&self.background) {
            return Err(Error::InvalidInput("background colour outside [0,1]".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let [x1, y1, x2, y2] = o.bbox;
            BoundingBox::new(x1, y1, x2, y2)
                .map_err(|e| Error::InvalidInput(format!("object {i}: {e}")))?;
            if !unit(&o.color) {
                return Err(Error::InvalidInput(format!("object {i}: colour outside [0,1]")));
            }
            if !(o.depth.is_finite() && o.depth > 0.0) {
                return Err(Error::InvalidInput(format!("object {i}: depth must be positive")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| Error::Schema {
            file: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

fn quantize_color(c: &[f64; 3]) -> [u64; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * COLOR_LEVELS).round() as u64)
}

/// Deterministic pseudo-random embedding of a (shape, colour) class; classes
/// are near-orthogonal in expectation. Background uses shape id 0.
fn class_embedding(shape_id: u64, color: &[f64; 3]) -> Vec<f64> {
    let [r, g, b] = quantize_color(color);
    let class = ((shape_id * 8 + r) * 8 + g) * 8 + b;
    let mut rng = ChaCha8Rng::seed_from_u64(EMBEDDING_KEY ^ class.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    (0..FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Feature vector of a (shape, colour) class, rounded to f32 precision.
pub fn object_feature<T: Scalar>(shape: Shape, color: &[f64; 3]) -> FeatureVector<T> {
    to_feature(&class_embedding(shape.id(), color))
}

fn to_feature<T: Scalar>(v: &[f64]) -> FeatureVector<T> {
    FeatureVector::new(v.iter().map(|x| T::lit(*x as f32 as f64)).collect()).expect("embedding has positive norm")
}

fn quantize_intensity(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Index of the object seen at each pixel (row-major), `None` for background.
/// Objects are painted far to near.
fn visibility(spec: &SceneSpec) -> Vec<Option<usize>> {
    let [w, h] = spec.canvas;
    let mut order: Vec<usize> = (0..spec.objects.len()).collect();
    order.sort_by(|&a, &b| spec.objects[b].depth.total_cmp(&spec.objects[a].depth).then(a.cmp(&b)));
    let mut owner = vec![None; w * h];
    for y in 0..h {
        let py = (y as f64 + 0.5) / h as f64;
        for x in 0..w {
            let px = (x as f64 + 0.5) / w as f64;
            for &i in &order {
                let o = &spec.objects[i];
                if o.shape.covers(&o.bbox, px, py) {
                    owner[y * w + x] = Some(i);
                }
            }
        }
    }
    owner
}

/// Rasterize a scene into a perception bundle.
pub fn render_scene<T: Scalar>(spec: &SceneSpec) -> Result<PerceptionBundle<T>> {
    spec.validate()?;
    let [w, h] = spec.canvas;
    let max_depth = spec.objects.iter().map(|o| o.depth).fold(f64::NAN, f64::max);
    let bg_depth = if max_depth.is_nan() { 1.0 } else { max_depth } * BACKGROUND_DEPTH_FACTOR;

    let owner = visibility(spec);

    let colors: Vec<[u8; 3]> = spec.objects.iter().map(|o| o.color.map(quantize_intensity)).collect();
    let bg = spec.background.map(quantize_intensity);
    let mut pixels = Vec::with_capacity(w * h * 3);
    let mut depth = Vec::with_capacity(w * h);
    let mut visible = vec![0usize; spec.objects.len()];
    let mut bg_pixels = 0usize;
    for o in &owner {
        let (rgb, d) = match o {
            Some(i) => {
                visible[*i] += 1;
                (colors[*i], spec.objects[*i].depth)
            }
            None => {
                bg_pixels += 1;
                (bg, bg_depth)
            }
        };
        pixels.extend(rgb.iter().map(|b| u8_to_intensity::<T>(*b)));
        depth.push(T::lit(d as f32 as f64));
    }

    // Global feature: class embeddings weighted by visible area.
    let total = (w * h) as f64;
    let mut global = class_embedding(0, &spec.background)
        .into_iter()
        .map(|v| v * bg_pixels as f64 / total)
        .collect::<Vec<_>>();
    for (o, &count) in spec.objects.iter().zip(&visible) {
        if count == 0 {
            continue;
        }
        let e = class_embedding(o.shape.id(), &o.color);
        for (g, v) in global.iter_mut().zip(e) {
            *g += v * count as f64 / total;
        }
    }

    let detections = spec
        .objects
        .iter()
        .map(|o| {
            let [x1, y1, x2, y2] = o.bbox.map(T::lit);
            Detection::new(
                BoundingBox::new(x1, y1, x2, y2)?,
                o.shape.name(),
                object_feature(o.shape, &o.color),
                T::one(),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut meta = BTreeMap::new();
    meta.insert("extractor".to_string(), "synthetic".to_string());
    meta.insert("scene_seed".to_string(), spec.seed.to_string());
    PerceptionBundle::new(
        ImageRaster::new(w, h, 3, pixels)?,
        to_feature(&global),
        detections,
        DepthMap::new(w, h, depth)?,
        Source::Synthetic,
        meta,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    DropObject,
    AddObject,
    MoveObject,
    Recolor,
    ReorderDepth,
}

impl Perturbation {
    pub const ALL: [Perturbation; 5] = [
        Perturbation::DropObject,
        Perturbation::AddObject,
        Perturbation::MoveObject,
        Perturbation::Recolor,
        Perturbation::ReorderDepth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Perturbation::DropObject => "drop_object",
            Perturbation::AddObject => "add_object",
            Perturbation::MoveObject => "move_object",
            Perturbation::Recolor => "recolor",
            Perturbation::ReorderDepth => "reorder_depth",
        }
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Perturbation::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown perturbation {s:?}")))
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let w = rng.gen_range(0.15..0.45);
    let h = rng.gen_range(0.15..0.45);
    let x1 = rng.gen_range(0.0..1.0 - w);
    let y1 = rng.gen_range(0.0..1.0 - h);
    [x1, y1, x1 + w, y1 + h]
}

fn class_of(o: &SceneObject) -> (Shape, [u64; 3]) {
    (o.shape, quantize_color(&o.color))
}

fn unused_classes(objects: &[SceneObject]) -> Vec<(Shape, [f64; 3])> {
    let used: Vec<_> = objects.iter().map(class_of).collect();
    Shape::ALL
        .iter()
        .flat_map(|s| PALETTE.iter().map(move |c| (*s, *c)))
        .filter(|(s, c)| !used.contains(&(*s, quantize_color(c))))
        .collect()
}

/// Random scene of 3 to 5 objects with distinct (shape, colour) classes,
/// distinct depths in `[1, 5)` and a mid-grey background.
pub fn random_scene(seed: u64, canvas: [usize; 2]) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(3..=5);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    while objects.len() < count {
        let (shape, color) = *unused_classes(&objects).choose(&mut rng).unwrap();
        let depth = loop {
            let d: f64 = rng.gen_range(1.0..5.0);
            if objects.iter().all(|o| (o.depth - d).abs() > 0.05) {
                break d;
            }
        };
        objects.push(SceneObject {
            shape,
            color,
            bbox: random_box(&mut rng),
            depth,
        });
    }
    let grey = rng.gen_range(0.35..0.65);
    SceneSpec {
        canvas,
        objects,
        background: [grey; 3],
        seed,
    }
}

fn farthest_palette_entry(c: &[f64; 3]) -> [f64; 3] {
    let dist = |p: &[f64; 3]| p.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    *PALETTE
        .iter()
        .max_by(|a, b| dist(a).total_cmp(&dist(b)))
        .unwrap()
}

/// Minimal, seeded edit of a scene.
///
/// * `drop_object` removes one object.
/// * `add_object` inserts an object of a class not yet in the scene.
/// * `move_object` translates one box along one axis by at least
///   [`MIN_MOVE`], staying inside the canvas.
/// * `recolor` repaints one visible object with the palette entry farthest
///   from its colour.
/// * `reorder_depth` swaps one object's depth with the object farthest from
///   it in depth. Objects whose box also shows background (non-squares) are
///   preferred as the target.
pub fn perturb_scene(s: &SceneSpec, kind: Perturbation, seed: u64) -> Result<SceneSpec> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1B5_4A32_D192_ED03);
    let mut out = s.clone();
    let n = s.objects.len();
    let need = |min: usize| {
        if n < min {
            Err(Error::Perturbation(format!("{} needs at least {min} object(s), scene has {n}", kind.name())))
        } else {
            Ok(())
        }
    };
    match kind {
        Perturbation::DropObject => {
            need(1)?;
            out.objects.remove(rng.gen_range(0..n));
        }
        Perturbation::AddObject => {
            let (shape, color) = *unused_classes(&s.objects)
                .choose(&mut rng)
                .ok_or_else(|| Error::Perturbation("every object class is already present".into()))?;
            out.objects.push(SceneObject {
                shape,
                color,
                bbox: random_box(&mut rng),
                depth: rng.gen_range(1.0..5.0),
            });
        }
        Perturbation::MoveObject => {
            need(1)?;
            let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
            for (i, o) in s.objects.iter().enumerate() {
                let [x1, y1, x2, y2] = o.bbox;
                for (dir, room) in [x1, 1.0 - x2, y1, 1.0 - y2].into_iter().enumerate() {
                    if room >= MIN_MOVE {
                        candidates.push((i, dir, room));
                    }
                }
            }
            let &(i, dir, room) = candidates
                .choose(&mut rng)
                .ok_or_else(|| Error::Perturbation("no box has room to move".into()))?;
            let shift = if room > MIN_MOVE { rng.gen_range(MIN_MOVE..=room) } else { MIN_MOVE };
            let b = &mut out.objects[i].bbox;
            match dir {
                0 => {
                    b[0] -= shift;
                    b[2] -= shift;
                }
                1 => {
                    b[0] += shift;
                    b[2] += shift;
                }
                2 => {
                    b[1] -= shift;
                    b[3] -= shift;
                }
                _ => {
                    b[1] += shift;
                    b[3] += shift;
                }
            }
            for v in b.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Perturbation::Recolor => {
            need(1)?;
            let mut shown = vec![false; n];
            for i in visibility(s).into_iter().flatten() {
                shown[i] = true;
            }
            let visible: Vec<usize> = (0..n).filter(|&i| shown[i]).collect();
            let &i = visible
                .choose(&mut rng)
                .ok_or_else(|| Error::Perturbation("no object is visible".into()))?;
            out.objects[i].color = farthest_palette_entry(&s.objects[i].color);
        }
        Perturbation::ReorderDepth => {
            need(2)?;
            let preferred: Vec<usize> = (0..n).filter(|&i| s.objects[i].shape != Shape::Square).collect();
            let pool: Vec<usize> = if preferred.is_empty() { (0..n).collect() } else { preferred };
            let target = *pool.choose(&mut rng).unwrap();
            let td = s.objects[target].depth;
            let other = (0..n)
                .filter(|&j| j != target)
                .max_by(|&a, &b| {
                    (s.objects[a].depth - td)
                        .abs()
                        .total_cmp(&(s.objects[b].depth - td).abs())
                        .then(b.cmp(&a))
                })
                .unwrap();
            if s.objects[other].depth == td {
                return Err(Error::Perturbation("all objects share one depth".into()));
            }
            out.objects[target].depth = s.objects[other].depth;
            out.objects[other].depth = td;
        }
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_circle() -> SceneSpec {
        SceneSpec {
            canvas: [32, 32],
            objects: vec![SceneObject {
                shape: Shape::Circle,
                color: [1.0, 0.0, 0.0],
                bbox: [0.25, 0.25, 0.75, 0.75],
                depth: 1.0,
            }],
            background: [0.5, 0.5, 0.5],
            seed: 0,
        }
    }

    #[test]
    fn empty_scene_is_uniform_background() {
        let spec = SceneSpec {
            objects: vec![],
            ..one_circle()
        };
        let b: PerceptionBundle<f64> = render_scene(&spec).unwrap();
        assert!(b.detections.is_empty());
        let first = b.image.data()[0];
        assert!(b.image.data().iter().all(|v| *v == first));
        assert!(b.depth.data().iter().all(|v| *v == 10.0));
    }

    #[test]
    fn single_circle_detection_and_depth() {
        let b: PerceptionBundle<f64> = render_scene(&one_circle()).unwrap();
        assert_eq!(b.detections.len(), 1);
        let d = &b.detections[0];
        assert_eq!((d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2), (0.25, 0.25, 0.75, 0.75));
        assert_eq!(d.feature.dim(), FEATURE_DIM);
        assert_eq!(d.label, "circle");
        assert_eq!(b.depth.get(16, 16), 1.0);
        assert_eq!(b.depth.get(0, 0), 10.0);
        assert_eq!(b.image.get(16, 16, 0), 1.0);
        assert_eq!(b.image.get(16, 16, 1), 0.0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = random_scene(5, [48, 40]);
        let a: PerceptionBundle<f64> = render_scene(&s).unwrap();
        let b: PerceptionBundle<f64> = render_scene(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nearer_objects_occlude() {
        let mut s = one_circle();
        s.objects.push(SceneObject {
            shape: Shape::Square,
            color: [0.0, 0.0, 1.0],
            bbox: [0.0, 0.0, 1.0, 1.0],
            depth: 3.0,
        });
        let b: PerceptionBundle<f64> = render_scene(&s).unwrap();
        assert_eq!(b.depth.get(16, 16), 1.0);
        assert_eq!(b.depth.get(0, 0), 3.0);
    }

    #[test]
    fn distinct_classes_are_nearly_orthogonal() {
        let a: FeatureVector<f64> = object_feature(Shape::Circle, &[1.0, 0.0, 0.0]);
        let b: FeatureVector<f64> = object_feature(Shape::Square, &[1.0, 0.0, 0.0]);
        let c = crate::semantic::cosine_similarity(&a, &b).unwrap();
        assert!(c.abs() < 0.5, "{c}");
    }

    #[test]
    fn drop_on_two_objects_leaves_one() {
        let mut s = one_circle();
        s.objects.push(SceneObject {
            shape: Shape::Triangle,
            color: [0.0, 1.0, 0.0],
            bbox: [0.1, 0.1, 0.3, 0.3],
            depth: 2.0,
        });
        assert_eq!(perturb_scene(&s, Perturbation::DropObject, 1).unwrap().objects.len(), 1);
    }

    #[test]
    fn move_translates_by_at_least_min_move() {
        for seed in 0..50 {
            let s = random_scene(seed, [32, 32]);
            let p = perturb_scene(&s, Perturbation::MoveObject, seed).unwrap();
            let moved: Vec<_> = s.objects.iter().zip(&p.objects).filter(|(a, b)| a != b).collect();
            assert_eq!(moved.len(), 1);
            let (a, b) = moved[0];
            let dx = b.bbox[0] - a.bbox[0];
            let dy = b.bbox[1] - a.bbox[1];
            assert!(dx.abs().max(dy.abs()) >= MIN_MOVE - 1e-12);
            assert!((b.bbox[2] - b.bbox[0] - (a.bbox[2] - a.bbox[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn recolor_picks_complement() {
        let p = perturb_scene(&one_circle(), Perturbation::Recolor, 3).unwrap();
        assert_eq!(p.objects[0].color, [0.0, 1.0, 1.0]);
        assert_eq!(p.objects[0].bbox, one_circle().objects[0].bbox);
    }

    #[test]
    fn inapplicable_perturbations() {
        let empty = SceneSpec {
            objects: vec![],
            ..one_circle()
        };
        assert!(matches!(
            perturb_scene(&empty, Perturbation::DropObject, 0),
            Err(Error::Perturbation(_))
        ));
        assert!(perturb_scene(&one_circle(), Perturbation::ReorderDepth, 0).is_err());
    }

    #[test]
    fn reorder_swaps_depths() {
        let s = random_scene(9, [32, 32]);
        let p = perturb_scene(&s, Perturbation::ReorderDepth, 9).unwrap();
        let mut a: Vec<f64> = s.objects.iter().map(|o| o.depth).collect();
        let mut b: Vec<f64> = p.objects.iter().map(|o| o.depth).collect();
        assert_ne!(a, b);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn scene_json_round_trip() {
        let s = random_scene(4, [16, 16]);
        let back: SceneSpec = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
