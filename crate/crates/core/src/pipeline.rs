//! Full comparison of an original bundle against a generated one.

use crate::data::{PerceptionBundle, SubScores};
use crate::error::{Error, Result};
use crate::object::{match_objects, spatial_scores, DepthMode};
use crate::pixel::{pixel_distance, PixelMetricConfig};
use crate::scalar::Scalar;
use crate::semantic::semantic_score;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig<T> {
    pub pixel: PixelMetricConfig<T>,
    pub depth_mode: DepthMode,
}

impl<T: Scalar> Default for ScoreConfig<T> {
    fn default() -> Self {
        Self {
            pixel: PixelMetricConfig::default(),
            depth_mode: DepthMode::default(),
        }
    }
}

/// The five sub-scores of `gen` against `ori`.
pub fn score_pair<T: Scalar>(
    ori: &PerceptionBundle<T>,
    gen: &PerceptionBundle<T>,
    cfg: &ScoreConfig<T>,
) -> Result<SubScores<T>> {
    if ori.feature_dim() != gen.feature_dim() {
        return Err(Error::DimensionMismatch {
            what: "feature dimension",
            expected: ori.feature_dim(),
            found: gen.feature_dim(),
        });
    }
    let l_pix = pixel_distance(&ori.image, &gen.image, &cfg.pixel)?;
    let l_sem = semantic_score(ori, gen)?;
    let (assignment, l_obj) = match_objects(&ori.detections, &gen.detections)?;
    let (l_ciou, l_dep) = spatial_scores(ori, gen, &assignment, cfg.depth_mode)?;
    SubScores::new(l_pix, l_sem, l_obj, l_ciou, l_dep)
}
