//! Spatial refinement of matched object pairs: CIoU box loss and
//! scale-invariant log-depth error.

use crate::data::{BoundingBox, DepthMap, PerceptionBundle};
use crate::error::{Error, Result};
use crate::object::assignment::Assignment;
use crate::raster::{crop_depth, resize_depth};
use crate::scalar::Scalar;

/// Side of the grid each matched box's depth crop is resampled to.
pub const DEPTH_CROP_SIZE: usize = 32;

/// Breakdown of the CIoU loss for one box pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialPairScore<T> {
    pub iou: T,
    /// Squared distance between box centres.
    pub center_distance_sq: T,
    /// Squared diagonal of the smallest enclosing box.
    pub enclosing_diag_sq: T,
    /// Aspect-ratio consistency term `v`.
    pub aspect_term: T,
    /// Trade-off weight `alpha` on `v`.
    pub tradeoff: T,
    pub ciou_loss: T,
    /// Depth error of the pair, when computed.
    pub depth_error: T,
}

/// `1 - IoU + d²/c² + alpha * v` in normalized coordinates.
pub fn ciou_loss<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> Result<SpatialPairScore<T>> {
    for bx in [a, b] {
        BoundingBox::new(bx.x1, bx.y1, bx.x2, bx.y2)?;
    }
    let zero = T::zero();
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(zero);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(zero);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    let iou = (inter / union).max(zero).min(T::one());

    let ew = a.x2.max(b.x2) - a.x1.min(b.x1);
    let eh = a.y2.max(b.y2) - a.y1.min(b.y1);
    let c2 = ew * ew + eh * eh;
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);

    let pi = T::lit(std::f64::consts::PI);
    let dv = (a.width() / a.height()).atan() - (b.width() / b.height()).atan();
    let v = T::lit(4.0) / (pi * pi) * dv * dv;
    let denom = (T::one() - iou) + v;
    let alpha = if denom > zero { v / denom } else { zero };

    Ok(SpatialPairScore {
        iou,
        center_distance_sq: d2,
        enclosing_diag_sq: c2,
        aspect_term: v,
        tradeoff: alpha,
        ciou_loss: T::one() - iou + d2 / c2 + alpha * v,
        depth_error: zero,
    })
}

/// Variance of per-pixel log-depth differences `log(gen) - log(ori)`.
pub fn scale_invariant_depth_error<T: Scalar>(ori: &DepthMap<T>, gen: &DepthMap<T>) -> Result<T> {
    if ori.width() != gen.width() || ori.height() != gen.height() {
        return Err(Error::DimensionMismatch {
            what: "depth maps",
            expected: ori.width() * ori.height(),
            found: gen.width() * gen.height(),
        });
    }
    log_variance(ori.data(), gen.data())
}

fn log_variance<T: Scalar>(ori: &[T], gen: &[T]) -> Result<T> {
    for (index, v) in ori.iter().chain(gen).enumerate() {
        // NaN must fail too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(*v > T::zero()) {
            return Err(Error::NonPositiveDepth {
                index: index % ori.len().max(1),
                value: v.to_f64_lossy(),
            });
        }
    }
    if ori.is_empty() {
        return Ok(T::zero());
    }
    let n = T::from_usize_lossy(ori.len());
    let diffs: Vec<T> = ori.iter().zip(gen).map(|(o, g)| g.ln() - o.ln()).collect();
    let mean = diffs.iter().copied().sum::<T>() / n;
    // Two-pass form of (1/n)Σd² - (1/n²)(Σd)².
    let var = diffs.iter().map(|d| (*d - mean) * (*d - mean)).sum::<T>() / n;
    Ok(var.max(T::zero()))
}

/// Pixel domain of the depth term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthMode {
    /// Per matched pair over box crops resampled to a common grid, averaged.
    #[default]
    Pairwise,
    /// Whole depth maps, the generated one resampled to the original's size.
    WholeImage,
}

/// `(L_CIoU, L_dep)` averaged over the assignment's real matched pairs.
pub fn spatial_scores<T: Scalar>(
    ori: &PerceptionBundle<T>,
    gen: &PerceptionBundle<T>,
    assignment: &Assignment<T>,
    mode: DepthMode,
) -> Result<(T, T)> {
    let pairs = &assignment.matched_real_pairs;
    let mut ciou_sum = T::zero();
    let mut dep_sum = T::zero();
    for &(i, j) in pairs {
        let (a, b) = match (ori.detections.get(i), gen.detections.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "assignment pair ({i}, {j}) does not index these bundles"
                )))
            }
        };
        ciou_sum += ciou_loss(&a.bbox, &b.bbox)?.ciou_loss;
        if mode == DepthMode::Pairwise {
            let ca = crop_depth(&ori.depth, &a.bbox, DEPTH_CROP_SIZE, DEPTH_CROP_SIZE);
            let cb = crop_depth(&gen.depth, &b.bbox, DEPTH_CROP_SIZE, DEPTH_CROP_SIZE);
            dep_sum += scale_invariant_depth_error(&ca, &cb)?;
        }
    }
    let l_ciou = if pairs.is_empty() {
        T::zero()
    } else {
        ciou_sum / T::from_usize_lossy(pairs.len())
    };
    let l_dep = match mode {
        DepthMode::Pairwise if pairs.is_empty() => T::zero(),
        DepthMode::Pairwise => dep_sum / T::from_usize_lossy(pairs.len()),
        DepthMode::WholeImage => {
            let g = resize_depth(&gen.depth, ori.depth.width(), ori.depth.height())?;
            scale_invariant_depth_error(&ori.depth, &g)?
        }
    };
    Ok((l_ciou, l_dep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox<f64> {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn identical_boxes_have_zero_loss() {
        let b = bb(0.1, 0.2, 0.6, 0.9);
        let s = ciou_loss(&b, &b).unwrap();
        assert_eq!((s.iou, s.center_distance_sq, s.aspect_term, s.tradeoff), (1.0, 0.0, 0.0, 0.0));
        assert_eq!(s.ciou_loss, 0.0);
    }

    #[test]
    fn disjoint_diagonal_quadrants() {
        let s = ciou_loss(&bb(0.0, 0.0, 0.5, 0.5), &bb(0.5, 0.5, 1.0, 1.0)).unwrap();
        assert_eq!(s.iou, 0.0);
        assert!((s.center_distance_sq - 0.5).abs() < 1e-15);
        assert!((s.enclosing_diag_sq - 2.0).abs() < 1e-15);
        assert_eq!(s.aspect_term, 0.0);
        assert!((s.ciou_loss - 1.25).abs() < 1e-15);
    }

    #[test]
    fn crossing_rectangles() {
        // 0.5x1 vs 1x0.5 sharing the top-left quadrant.
        let s = ciou_loss(&bb(0.0, 0.0, 0.5, 1.0), &bb(0.0, 0.0, 1.0, 0.5)).unwrap();
        assert!((s.iou - 1.0 / 3.0).abs() < 1e-15);
        let dv = 0.5f64.atan() - 2f64.atan();
        let v = 4.0 / (std::f64::consts::PI.powi(2)) * dv * dv;
        assert!((s.aspect_term - v).abs() < 1e-15);
        // centres (0.25,0.5) and (0.5,0.25); enclosing box is the unit square
        assert!((s.center_distance_sq - 0.125).abs() < 1e-15);
        assert!((s.enclosing_diag_sq - 2.0).abs() < 1e-15);
        let alpha = v / (2.0 / 3.0 + v);
        assert!((s.ciou_loss - (2.0 / 3.0 + 0.0625 + alpha * v)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let bad = BoundingBox { x1: 0.2, y1: 0.2, x2: 0.2, y2: 0.5 };
        assert!(matches!(ciou_loss(&bad, &bb(0.0, 0.0, 1.0, 1.0)), Err(Error::DegenerateBox { .. })));
    }

    fn dm(w: usize, h: usize, v: &[f64]) -> DepthMap<f64> {
        DepthMap::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn depth_error_examples() {
        let a = dm(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(scale_invariant_depth_error(&a, &a).unwrap(), 0.0);
        let scaled = a.scaled(7.5).unwrap();
        assert!(scale_invariant_depth_error(&a, &scaled).unwrap() < 1e-15);
        let e = scale_invariant_depth_error(&dm(2, 1, &[1.0, 1.0]), &dm(2, 1, &[1.0, 2.0])).unwrap();
        assert!((e - 0.120_113_253_479_550_35).abs() < 1e-15);
    }

    #[test]
    fn depth_error_rejects_mismatch() {
        assert!(scale_invariant_depth_error(&dm(2, 1, &[1.0, 1.0]), &dm(1, 2, &[1.0, 1.0])).is_err());
    }
}
