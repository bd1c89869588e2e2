//! Cost matrices and minimum-cost perfect matching.

use crate::data::Detection;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::semantic::cosine_similarity;

/// Largest side accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_MAX_SIDE: usize = 9;

/// Row-major cost matrix. Rows at or past `pad_from_row` and columns at or
/// past `pad_from_col` are padding slots.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
    pad_from_row: usize,
    pad_from_col: usize,
}

impl<T: Scalar> CostMatrix<T> {
    /// Unpadded matrix from explicit entries (any finite costs).
    pub fn new(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "cost matrix entries",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            pad_from_row: rows,
            pad_from_col: cols,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                what: "cost matrix row",
                expected: cols,
                found: r.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Number of real (unpadded) rows.
    pub fn pad_from_row(&self) -> usize {
        self.pad_from_row
    }

    /// Number of real (unpadded) columns.
    pub fn pad_from_col(&self) -> usize {
        self.pad_from_col
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.cols + j]
    }

    pub fn is_padding(&self, i: usize, j: usize) -> bool {
        i >= self.pad_from_row || j >= self.pad_from_col
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.entries.chunks(self.cols).map(<[T]>::to_vec).collect()
    }
}

/// `cost[i][j] = 1 - cos(f_ori[i], f_gen[j])`, each entry in `[0, 2]`.
pub fn build_cost_matrix<T: Scalar>(ori: &[Detection<T>], gen: &[Detection<T>]) -> Result<CostMatrix<T>> {
    let mut entries = Vec::with_capacity(ori.len() * gen.len());
    for a in ori {
        for b in gen {
            entries.push(T::one() - cosine_similarity(&a.feature, &b.feature)?);
        }
    }
    CostMatrix::new(ori.len(), gen.len(), entries)
}

/// Extend to a square matrix of side `max(rows, cols)`; new slots cost 1.
pub fn pad_cost_matrix<T: Scalar>(c: &CostMatrix<T>) -> CostMatrix<T> {
    let side = c.rows.max(c.cols);
    let mut entries = vec![T::one(); side * side];
    for i in 0..c.rows {
        entries[i * side..i * side + c.cols].copy_from_slice(&c.entries[i * c.cols..(i + 1) * c.cols]);
    }
    CostMatrix {
        rows: side,
        cols: side,
        entries,
        pad_from_row: c.pad_from_row.min(c.rows),
        pad_from_col: c.pad_from_col.min(c.cols),
    }
}

/// A perfect matching on a square cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: T,
    /// Pairs where neither side is padding.
    pub matched_real_pairs: Vec<(usize, usize)>,
}

impl<T: Scalar> Assignment<T> {
    fn from_columns(c: &CostMatrix<T>, col_of_row: &[usize]) -> Self {
        let pairs: Vec<(usize, usize)> = col_of_row.iter().copied().enumerate().collect();
        let total_cost = pairs.iter().map(|&(i, j)| c.get(i, j)).sum();
        let matched_real_pairs = pairs.iter().copied().filter(|&(i, j)| !c.is_padding(i, j)).collect();
        Self {
            pairs,
            total_cost,
            matched_real_pairs,
        }
    }
}

/// Kuhn-Munkres with row/column potentials and shortest augmenting paths;
/// `O(k³)` for side `k`.
pub fn hungarian_solve<T: Scalar>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    if !c.is_square() {
        return Err(Error::NotSquare {
            rows: c.rows,
            cols: c.cols,
        });
    }
    let n = c.rows;
    // 1-based internally; index 0 is the virtual source column.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_to = vec![T::infinity(); n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        min_to.iter_mut().for_each(|m| *m = T::infinity());
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = T::infinity();
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    Ok(Assignment::from_columns(c, &col_of_row))
}

/// Exhaustive minimum over all permutations. Test oracle for
/// [`hungarian_solve`]; limited to side [`BRUTE_FORCE_MAX_SIDE`].
pub fn brute_force_assignment<T: Scalar>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    if !c.is_square() {
        return Err(Error::NotSquare {
            rows: c.rows,
            cols: c.cols,
        });
    }
    let n = c.rows;
    if n > BRUTE_FORCE_MAX_SIDE {
        return Err(Error::TooLarge {
            side: n,
            max: BRUTE_FORCE_MAX_SIDE,
        });
    }
    let cost_of = |perm: &[usize]| -> T { perm.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum() };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost_of(&perm);
    while next_permutation(&mut perm) {
        let cost = cost_of(&perm);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment::from_columns(c, &best))
}

/// Lexicographic successor; false once the sequence is the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let Some(i) = (0..p.len() - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..p.len()).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
