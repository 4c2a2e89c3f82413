//! Deterministic linear-algebra primitives: half-vectorization machinery,
//! duplication/elimination selectors, symmetric eigendecomposition, PSD
//! projection, Kronecker products, and the padding/rearrangement operators
//! used for coefficient recovery.
//!
//! Everything here is pure and reentrant; values are safely shareable across
//! threads after construction.

pub mod eigen;
pub mod index;
pub mod pad;
pub mod selectors;

pub use eigen::{psd_project, psd_sqrt, sym_eigen, SymEigen};
pub use pad::{half_split, pad, pad_adjoint_w, rearrange, rearrange_adjoint, true_split, PadAux};
pub use selectors::{duplication_matrix, elimination_matrix, SparseSelector};

use crate::error::{BekkError, Result};
use nalgebra::{DMatrix, DVector};

/// Symmetric matrix newtype. Construction validates symmetry; arithmetic that
/// can break exact symmetry goes through [`SymMatrix::symmetrize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Symmetry slack tolerated by [`SymMatrix::new`] after floating-point
/// arithmetic, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl SymMatrix {
    /// Wraps a square matrix, requiring `|m_ij - m_ji| <= 1e-12 * scale`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(BekkError::invalid(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(BekkError::invalid(format!(
                        "matrix is not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Symmetrizes `(m + m^T) / 2` and wraps the result.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(BekkError::invalid(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut s = m.clone();
        for i in 0..m.nrows() {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(SymMatrix(s))
    }

    /// Identity matrix wrapper.
    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    /// Diagonal matrix wrapper.
    pub fn from_diagonal(d: &DVector<f64>) -> Self {
        SymMatrix(DMatrix::from_diagonal(d))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Half-vectorization of a symmetric matrix (lower triangle, column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct VechVector {
    n: usize,
    values: DVector<f64>,
}

impl VechVector {
    /// Wraps a raw vector, requiring its length to be a triangular number.
    pub fn new(values: DVector<f64>) -> Result<Self> {
        let n = index::n_from_vech_len(values.len()).ok_or_else(|| {
            BekkError::invalid(format!(
                "vech length {} is not of the form n(n+1)/2",
                values.len()
            ))
        })?;
        Ok(VechVector { n, values })
    }

    /// Dimension of the source matrix.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }
}

/// `vech(M)`: stacks the lower triangle of `M` column by column.
pub fn vech(m: &SymMatrix) -> VechVector {
    let n = m.n();
    let mut values = DVector::zeros(index::vech_len(n));
    for c in 0..n {
        for r in c..n {
            values[index::vech_index(n, r, c)] = m[(r, c)];
        }
    }
    VechVector { n, values }
}

/// `vech^{-1}(v)`: exact inverse of [`vech`].
pub fn vech_inv(v: &VechVector) -> SymMatrix {
    let n = v.n;
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        for r in c..n {
            let val = v.values[index::vech_index(n, r, c)];
            m[(r, c)] = val;
            m[(c, r)] = val;
        }
    }
    SymMatrix(m)
}

/// `vech^{-1}` from a raw slice-backed vector; errors if the length is not
/// triangular.
pub fn vech_inv_raw(values: &DVector<f64>) -> Result<SymMatrix> {
    let v = VechVector::new(values.clone())?;
    Ok(vech_inv(&v))
}

/// Column-major vectorization of an arbitrary matrix.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for a square target.
pub fn vec_inv(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = index::n_from_vec_len(v.len())
        .ok_or_else(|| BekkError::invalid(format!("vec length {} is not a square", v.len())))?;
    Ok(DMatrix::from_column_slice(n, n, v.as_slice()))
}

/// Kronecker product with the standard block structure.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym_from_rows(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        SymMatrix::new(m).unwrap()
    }

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        // small deterministic LCG; keeps unit tests free of RNG crates
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix::new(m).unwrap()
    }

    #[test]
    fn vech_identity_2x2() {
        let v = vech(&SymMatrix::identity(2));
        assert_eq!(v.as_vector().as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn vech_ordering_2x2() {
        let (a, b, c) = (1.5, -2.0, 0.25);
        let m = sym_from_rows(&[&[a, b], &[b, c]]);
        assert_eq!(vech(&m).as_vector().as_slice(), &[a, b, c]);
        let back = vech_inv(&vech(&m));
        assert_eq!(back, m);
    }

    #[test]
    fn vech_inv_trivial() {
        let v = VechVector::new(DVector::from_vec(vec![1.0, 0.0, 1.0])).unwrap();
        assert_eq!(vech_inv(&v), SymMatrix::identity(2));
    }

    #[test]
    fn vech_round_trip_random_4x4() {
        let m = random_sym(4, 7);
        let back = vech_inv(&vech(&m));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(back[(i, j)], m[(i, j)]);
            }
        }
    }

    #[test]
    fn vech_rejects_bad_length() {
        assert!(VechVector::new(DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).is_err());
    }

    #[test]
    fn symmetry_validation() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 1e-6;
        assert!(SymMatrix::new(m.clone()).is_err());
        assert!(SymMatrix::symmetrize(&m).is_ok());
    }

    #[test]
    fn kron_identity() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(kron(&i2, &i2), DMatrix::identity(4, 4));
    }

    #[test]
    fn kron_vectorization_identity() {
        // (A (x) A) vec(M) == vec(A M A^T)
        let a = DMatrix::from_row_slice(3, 3, &[0.3, -1.2, 0.7, 2.0, 0.1, -0.4, 0.9, 0.5, -1.1]);
        let m = random_sym(3, 42).into_matrix();
        let lhs = kron(&a, &a) * vec_of(&m);
        let rhs = vec_of(&(&a * &m * a.transpose()));
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }
}
