//! Padding and rearrangement operators for coefficient recovery.
//!
//! The lag matrix of the half-vectorized model compresses the Kronecker sum
//! `G = sum_k A_k (x) A_k`: each off-diagonal/off-diagonal cell of the
//! compressed `d x d` matrix merges two distinct cross-products of `G`. The
//! padding operator reverses the compression given an auxiliary `g x g`
//! matrix `W` holding one member of every merged pair; the rearrangement
//! operator is the index permutation sending `A (x) A` to the rank-one
//! matrix `vec(A) vec(A)^T`.
//!
//! Index maps live in [`super::index`] and are unit-tested exhaustively: an
//! off-by-one anywhere here silently corrupts recovery.

use super::index::{kappa, n_from_vec_len, n_from_vech_len, pair_index, pair_len, vech_len};
use crate::error::{BekkError, Result};
use nalgebra::DMatrix;

/// Auxiliary split matrix `W` (`g x g`, `g = N(N-1)/2`) for the padding
/// operator. Entry `[e(i1,i2), e(o1,o2)]` is the coefficient assigned to the
/// upper cross-product of input pair `{i1,i2}` in the equation of output pair
/// `{o1,o2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PadAux {
    g: usize,
    values: DMatrix<f64>,
}

impl PadAux {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(BekkError::invalid(format!(
                "pad auxiliary matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(PadAux { g: values.nrows(), values })
    }

    pub fn zeros(g: usize) -> Self {
        PadAux { g, values: DMatrix::zeros(g, g) }
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn as_matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }
}

fn infer_n(phi: &DMatrix<f64>, w: &PadAux) -> Result<usize> {
    if phi.nrows() != phi.ncols() {
        return Err(BekkError::invalid(format!(
            "pad expects a square coefficient matrix, got {}x{}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    let n = n_from_vech_len(phi.nrows()).ok_or_else(|| {
        BekkError::invalid(format!("pad coefficient side {} is not n(n+1)/2", phi.nrows()))
    })?;
    if w.g() != pair_len(n) {
        return Err(BekkError::invalid(format!(
            "pad auxiliary side {} does not match n(n-1)/2 = {} for n = {n}",
            w.g(),
            pair_len(n)
        )));
    }
    Ok(n)
}

/// Padding operator: reconstructs the `N^2 x N^2` Kronecker-sum matrix from
/// the compressed `d x d` coefficient matrix and the split matrix `W`.
///
/// When `phi` comes from a true Kronecker sum and `w` holds the true split
/// coefficients, the result equals `sum_k A_k (x) A_k` exactly.
pub fn pad(phi: &DMatrix<f64>, w: &PadAux) -> Result<DMatrix<f64>> {
    let n = infer_n(phi, w)?;
    let d = vech_len(n);
    let nn = n * n;
    let pi = |u: usize, v: usize| u * n + v;

    // column-wise padding: split vech input columns into the two vec columns
    let mut cext = DMatrix::zeros(d, nn);
    for m in 0..n {
        let src = kappa(n, m, m);
        for r in 0..d {
            cext[(r, pi(m, m))] = phi[(r, src)];
        }
    }
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            let src = kappa(n, i1, i2);
            for h in 0..n {
                let row = kappa(n, h, h);
                let half = 0.5 * phi[(row, src)];
                cext[(row, pi(i1, i2))] = half;
                cext[(row, pi(i2, i1))] = half;
            }
            for o1 in 0..n {
                for o2 in o1 + 1..n {
                    let row = kappa(n, o1, o2);
                    let split = w.values[(pair_index(n, i1, i2), pair_index(n, o1, o2))];
                    cext[(row, pi(i1, i2))] = split;
                    cext[(row, pi(i2, i1))] = phi[(row, src)] - split;
                }
            }
        }
    }

    // row-wise padding: duplicate each off-diagonal vech row into its two vec
    // rows, swapping the split columns on the mirrored copy
    let mut h = DMatrix::zeros(nn, nn);
    for m in 0..n {
        let src = kappa(n, m, m);
        for c in 0..nn {
            h[(pi(m, m), c)] = cext[(src, c)];
        }
    }
    for o1 in 0..n {
        for o2 in o1 + 1..n {
            let src = kappa(n, o1, o2);
            for hh in 0..n {
                let v = cext[(src, pi(hh, hh))];
                h[(pi(o1, o2), pi(hh, hh))] = v;
                h[(pi(o2, o1), pi(hh, hh))] = v;
            }
            for i1 in 0..n {
                for i2 in i1 + 1..n {
                    let a = cext[(src, pi(i1, i2))];
                    let b = cext[(src, pi(i2, i1))];
                    h[(pi(o2, o1), pi(i1, i2))] = a;
                    h[(pi(o2, o1), pi(i2, i1))] = b;
                    h[(pi(o1, o2), pi(i1, i2))] = b;
                    h[(pi(o1, o2), pi(i2, i1))] = a;
                }
            }
        }
    }
    Ok(h)
}

/// Adjoint of `W |-> pad(0, W)`: pulls a gradient on the padded matrix back
/// to the `W` slots. Used for analytic gradients of spectral losses.
pub fn pad_adjoint_w(dh: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let nn = n * n;
    if dh.nrows() != nn || dh.ncols() != nn {
        return Err(BekkError::invalid(format!(
            "pad adjoint expects {nn}x{nn}, got {}x{}",
            dh.nrows(),
            dh.ncols()
        )));
    }
    let g = pair_len(n);
    let pi = |u: usize, v: usize| u * n + v;
    let mut grad = DMatrix::zeros(g, g);
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            for o1 in 0..n {
                for o2 in o1 + 1..n {
                    grad[(pair_index(n, i1, i2), pair_index(n, o1, o2))] = dh
                        [(pi(o2, o1), pi(i1, i2))]
                        + dh[(pi(o1, o2), pi(i2, i1))]
                        - dh[(pi(o2, o1), pi(i2, i1))]
                        - dh[(pi(o1, o2), pi(i1, i2))];
                }
            }
        }
    }
    Ok(grad)
}

/// Rearrangement operator: the pure index permutation with
/// `rearrange(A (x) A) = vec(A) vec(A)^T` for every `N x N` matrix `A`
/// (column-major `vec`).
pub fn rearrange(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(BekkError::invalid(format!(
            "rearrange expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = n_from_vec_len(m.nrows()).ok_or_else(|| {
        BekkError::invalid(format!("rearrange side {} is not a perfect square", m.nrows()))
    })?;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[(k * n + i, l * n + j)] = m[(i * n + j, k * n + l)];
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint (inverse) of [`rearrange`].
pub fn rearrange_adjoint(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if f.nrows() != f.ncols() {
        return Err(BekkError::invalid(format!(
            "rearrange adjoint expects a square matrix, got {}x{}",
            f.nrows(),
            f.ncols()
        )));
    }
    let n = n_from_vec_len(f.nrows()).ok_or_else(|| {
        BekkError::invalid(format!("rearrange side {} is not a perfect square", f.nrows()))
    })?;
    let mut out = DMatrix::zeros(f.nrows(), f.ncols());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[(i * n + j, k * n + l)] = f[(k * n + i, l * n + j)];
                }
            }
        }
    }
    Ok(out)
}

/// True split matrix for a set of Kronecker components: the `W` that makes
/// `pad` reproduce `sum_k A_k (x) A_k` exactly. Used to build ground truth
/// in simulations and tests.
pub fn true_split(components: &[DMatrix<f64>]) -> Result<PadAux> {
    let n = match components.first() {
        Some(a) => a.nrows(),
        None => return Err(BekkError::invalid("true_split requires at least one component")),
    };
    for a in components {
        if a.nrows() != n || a.ncols() != n {
            return Err(BekkError::invalid("true_split components must share a square shape"));
        }
    }
    let g = pair_len(n);
    let mut w = DMatrix::zeros(g, g);
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            for o1 in 0..n {
                for o2 in o1 + 1..n {
                    let mut acc = 0.0;
                    for a in components {
                        acc += a[(o1, i2)] * a[(o2, i1)];
                    }
                    w[(pair_index(n, i1, i2), pair_index(n, o1, o2))] = acc;
                }
            }
        }
    }
    PadAux::new(w)
}

/// Half-split initialization: assigns half of each merged coefficient to the
/// `W` slot. A symmetric, deterministic starting point for the `W` search.
pub fn half_split(phi: &DMatrix<f64>) -> Result<PadAux> {
    let n = n_from_vech_len(phi.nrows()).ok_or_else(|| {
        BekkError::invalid(format!("half_split coefficient side {} is not n(n+1)/2", phi.nrows()))
    })?;
    let g = pair_len(n);
    let mut w = DMatrix::zeros(g, g);
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            for o1 in 0..n {
                for o2 in o1 + 1..n {
                    w[(pair_index(n, i1, i2), pair_index(n, o1, o2))] =
                        0.5 * phi[(kappa(n, o1, o2), kappa(n, i1, i2))];
                }
            }
        }
    }
    PadAux::new(w)
}
