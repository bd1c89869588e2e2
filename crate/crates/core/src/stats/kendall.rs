//! Kendall rank correlation with tie corrections, `O(n log n)`.
//!
//! Pairs are sorted by `(x, y)`, tie groups are counted on both axes, and
//! discordant pairs are counted as the inversions removed by a bottom-up
//! merge sort on `y`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pair classification counts over all `n(n-1)/2` observation pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub n: usize,
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in x only.
    pub ties_x: u64,
    /// Pairs tied in y only.
    pub ties_y: u64,
    /// Pairs tied on both axes.
    pub ties_xy: u64,
    pub distinct_x: usize,
    pub distinct_y: usize,
}

impl PairCounts {
    pub fn total_pairs(&self) -> u64 {
        let n = self.n as u64;
        n * n.saturating_sub(1) / 2
    }
}

fn cmp<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).expect("NaN filtered before sorting")
}

/// Sum of `t(t-1)/2` over runs of equal values, plus the number of runs.
fn tie_runs<I: Iterator<Item = bool>>(n: usize, same_as_prev: I) -> (u64, usize) {
    if n == 0 {
        return (0, 0);
    }
    let mut pairs = 0u64;
    let mut run = 1u64;
    let mut runs = 1usize;
    for same in same_as_prev {
        if same {
            run += 1;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
            runs += 1;
        }
    }
    (pairs + run * (run - 1) / 2, runs)
}

/// Number of inversions in `ys`, sorting it in place.
fn count_inversions<T: Scalar>(ys: &mut [T]) -> u64 {
    let n = ys.len();
    let mut buf = ys.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    let (mut src, mut dst): (&mut [T], &mut [T]) = (ys, &mut buf);
    let mut in_src = true;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if cmp(src[j], src[i]) == Ordering::Less {
                    dst[k] = src[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    dst[k] = src[i];
                    i += 1;
                }
                k += 1;
            }
            dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
            k += mid - i;
            dst[k..k + (end - j)].copy_from_slice(&src[j..end]);
            start = end;
        }
        std::mem::swap(&mut src, &mut dst);
        in_src = !in_src;
        width *= 2;
    }
    if !in_src {
        dst.copy_from_slice(src);
    }
    swaps
}

/// Concordance counts for paired observations.
pub fn pair_counts<T: Scalar>(pairs: &[(T, T)]) -> Result<PairCounts> {
    if pairs.iter().any(|(x, y)| x.is_nan() || y.is_nan()) {
        return Err(Error::InvalidInput("NaN in paired observations".into()));
    }
    let n = pairs.len();
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let (tied_x, distinct_x) = tie_runs(n, sorted.windows(2).map(|w| w[0].0 == w[1].0));
    let (tied_xy, _) = tie_runs(n, sorted.windows(2).map(|w| w[0] == w[1]));

    let mut ys: Vec<T> = sorted.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut ys);
    let (tied_y, distinct_y) = tie_runs(n, ys.windows(2).map(|w| w[0] == w[1]));

    let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let concordant = total + tied_xy - tied_x - tied_y - discordant;
    Ok(PairCounts {
        n,
        concordant,
        discordant,
        ties_x: tied_x - tied_xy,
        ties_y: tied_y - tied_xy,
        ties_xy: tied_xy,
        distinct_x,
        distinct_y,
    })
}

/// Tau-b from precomputed counts.
pub fn tau_b_from_counts(c: &PairCounts) -> Result<f64> {
    if c.n < 2 {
        return Err(Error::Degenerate(format!("tau_b needs n >= 2, got {}", c.n)));
    }
    let untied = (c.concordant + c.discordant) as f64;
    let dx = untied + c.ties_x as f64;
    let dy = untied + c.ties_y as f64;
    if dx == 0.0 || dy == 0.0 {
        return Err(Error::Degenerate("all observations tied on one axis".into()));
    }
    let s = c.concordant as f64 - c.discordant as f64;
    Ok((s / (dx.sqrt() * dy.sqrt())).clamp(-1.0, 1.0))
}

/// Stuart's tau-c from precomputed counts.
pub fn tau_c_from_counts(c: &PairCounts) -> Result<f64> {
    if c.n < 2 {
        return Err(Error::Degenerate(format!("tau_c needs n >= 2, got {}", c.n)));
    }
    let q = c.distinct_x.min(c.distinct_y);
    if q < 2 {
        return Err(Error::Degenerate(format!(
            "tau_c needs at least 2 distinct values per axis, got {q}"
        )));
    }
    let n = c.n as f64;
    let q = q as f64;
    let s = c.concordant as f64 - c.discordant as f64;
    Ok((s * 2.0 * q / (n * n * (q - 1.0))).clamp(-1.0, 1.0))
}

/// Kendall's tau-b: `(P - Q) / sqrt((P + Q + T_x)(P + Q + T_y))`.
pub fn kendall_tau_b<T: Scalar>(pairs: &[(T, T)]) -> Result<f64> {
    tau_b_from_counts(&pair_counts(pairs)?)
}

/// Stuart's tau-c: `2q(P - Q) / (n²(q - 1))`, `q` the smaller number of
/// distinct values on either axis.
pub fn kendall_tau_c<T: Scalar>(pairs: &[(T, T)]) -> Result<f64> {
    tau_c_from_counts(&pair_counts(pairs)?)
}
