//! Semantic-level comparison: cosine similarity of global features.

use crate::data::{FeatureVector, PerceptionBundle};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `<a,b> / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &FeatureVector<T>, b: &FeatureVector<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature vectors",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na <= T::zero() || nb <= T::zero() {
        return Err(Error::ZeroNorm);
    }
    let dot: T = a.values().iter().zip(b.values()).map(|(x, y)| *x * *y).sum();
    // sqrt(s·s) rounds back to s, so a vector against itself gives exactly 1.
    let sq = |v: &[T]| v.iter().map(|x| *x * *x).sum::<T>();
    let prod = sq(a.values()) * sq(b.values());
    let denom = if prod.is_normal() { prod.sqrt() } else { na * nb };
    Ok((dot / denom).max(-T::one()).min(T::one()))
}

/// `L_sem` between two bundles.
pub fn semantic_score<T: Scalar>(ori: &PerceptionBundle<T>, gen: &PerceptionBundle<T>) -> Result<T> {
    cosine_similarity(&ori.global_feature, &gen.global_feature)
}
