//! Duplication and elimination matrices as sparse selectors.
//!
//! `D_N` maps `vech(M)` to `vec(M)` for symmetric `M`; its Moore-Penrose
//! inverse `D_N^+` maps back, averaging the two copies of each off-diagonal
//! entry. Both are pure selectors (at most two nonzeros per column/row), so
//! they are stored as triple lists and never materialized densely on the hot
//! path.

use super::index::{vec_index, vech_index, vech_len};
use crate::error::{BekkError, Result};
use nalgebra::{DMatrix, DVector};

/// Sparse 0/1-or-1/2 selector stored as `(row, col, value)` triples.
#[derive(Debug, Clone)]
pub struct SparseSelector {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSelector {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Dense materialization, intended for tests and small `N`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Applies the selector to a vector.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.cols {
            return Err(BekkError::invalid(format!(
                "selector expects length {}, got {}",
                self.cols,
                v.len()
            )));
        }
        let mut out = DVector::zeros(self.rows);
        for &(r, c, w) in &self.entries {
            out[r] += w * v[c];
        }
        Ok(out)
    }
}

/// Duplication matrix `D_N` (`N^2 x d`): `D_N vech(M) = vec(M)` for symmetric `M`.
pub fn duplication_matrix(n: usize) -> Result<SparseSelector> {
    if n < 1 {
        return Err(BekkError::invalid("duplication matrix requires N >= 1"));
    }
    let d = vech_len(n);
    let mut entries = Vec::with_capacity(n * n);
    for c in 0..n {
        for r in c..n {
            let q = vech_index(n, r, c);
            entries.push((vec_index(n, r, c), q, 1.0));
            if r > c {
                entries.push((vec_index(n, c, r), q, 1.0));
            }
        }
    }
    Ok(SparseSelector { rows: n * n, cols: d, entries })
}

/// Elimination matrix `D_N^+` (`d x N^2`): Moore-Penrose inverse of `D_N`,
/// with weight 1 on diagonal entries and 1/2 on each off-diagonal copy.
pub fn elimination_matrix(n: usize) -> Result<SparseSelector> {
    if n < 1 {
        return Err(BekkError::invalid("elimination matrix requires N >= 1"));
    }
    let d = vech_len(n);
    let mut entries = Vec::with_capacity(n * n);
    for c in 0..n {
        for r in c..n {
            let q = vech_index(n, r, c);
            if r == c {
                entries.push((q, vec_index(n, r, c), 1.0));
            } else {
                entries.push((q, vec_index(n, r, c), 0.5));
                entries.push((q, vec_index(n, c, r), 0.5));
            }
        }
    }
    Ok(SparseSelector { rows: d, cols: n * n, entries })
}

/// Fast path for `vech(M) -> vec(M)` without building the selector.
pub fn vech_to_vec(n: usize, vech: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(vech.len(), vech_len(n));
    let mut out = DVector::zeros(n * n);
    for c in 0..n {
        for r in c..n {
            let v = vech[vech_index(n, r, c)];
            out[vec_index(n, r, c)] = v;
            out[vec_index(n, c, r)] = v;
        }
    }
    out
}

/// Fast path for `vec(M) -> vech(M)` (averaging symmetric copies).
pub fn vec_to_vech(n: usize, vec: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(vec.len(), n * n);
    let mut out = DVector::zeros(vech_len(n));
    for c in 0..n {
        for r in c..n {
            let v = if r == c {
                vec[vec_index(n, r, c)]
            } else {
                0.5 * (vec[vec_index(n, r, c)] + vec[vec_index(n, c, r)])
            };
            out[vech_index(n, r, c)] = v;
        }
    }
    out
}

/// `Phi = D_N^+ G D_N` computed through the fast paths; `G` is `N^2 x N^2`.
pub fn compress_kron(n: usize, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() != n * n || g.ncols() != n * n {
        return Err(BekkError::invalid(format!(
            "expected {0}x{0} matrix for compression, got {1}x{2}",
            n * n,
            g.nrows(),
            g.ncols()
        )));
    }
    let d = vech_len(n);
    let mut phi = DMatrix::zeros(d, d);
    // column pass: right-multiplication by D_N sums the two vec columns of
    // each off-diagonal pair; row pass: left D_N^+ averages row copies.
    for cc in 0..n {
        for cr in cc..n {
            let qc = vech_index(n, cr, cc);
            for rc in 0..n {
                for rr in rc..n {
                    let qr = vech_index(n, rr, rc);
                    let col_a = vec_index(n, cr, cc);
                    let col_b = vec_index(n, cc, cr);
                    let row_a = vec_index(n, rr, rc);
                    let row_b = vec_index(n, rc, rr);
                    let col_sum = |row: usize| {
                        if cr == cc {
                            g[(row, col_a)]
                        } else {
                            g[(row, col_a)] + g[(row, col_b)]
                        }
                    };
                    phi[(qr, qc)] = if rr == rc {
                        col_sum(row_a)
                    } else {
                        0.5 * (col_sum(row_a) + col_sum(row_b))
                    };
                }
            }
        }
    }
    Ok(phi)
}
