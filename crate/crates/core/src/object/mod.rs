//! Object-level comparison: feature cost matrix, count-penalty padding,
//! optimal assignment and spatial refinement of the matched pairs.

pub mod assignment;
pub mod spatial;

pub use assignment::{
    brute_force_assignment, build_cost_matrix, hungarian_solve, pad_cost_matrix, Assignment, CostMatrix,
};
pub use spatial::{ciou_loss, scale_invariant_depth_error, spatial_scores, DepthMode, SpatialPairScore};

use crate::data::Detection;
use crate::error::Result;
use crate::scalar::Scalar;

/// Optimal matching of `ori` against `gen` and the mean cost per slot.
///
/// Surplus or missing objects are matched against padding at cost 1, so
/// the score is `min_total_cost / max(m, n)`. Both lists empty scores 0.
pub fn match_objects<T: Scalar>(ori: &[Detection<T>], gen: &[Detection<T>]) -> Result<(Assignment<T>, T)> {
    let padded = pad_cost_matrix(&build_cost_matrix(ori, gen)?);
    let assignment = hungarian_solve(&padded)?;
    let slots = padded.rows();
    let score = if slots == 0 {
        T::zero()
    } else {
        (assignment.total_cost / T::from_usize_lossy(slots)).max(T::zero())
    };
    Ok((assignment, score))
}

/// `L_obj` in `[0, 2]`.
pub fn object_match_score<T: Scalar>(ori: &[Detection<T>], gen: &[Detection<T>]) -> Result<T> {
    match_objects(ori, gen).map(|(_, s)| s)
}
