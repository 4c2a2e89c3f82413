//! Symmetric eigendecomposition and PSD projection.
//!
//! The solver is the classical two-stage routine: Householder reduction to
//! tridiagonal form followed by the implicit-shift QL iteration, capped at 30
//! sweeps per eigenvalue. Eigenvectors get a deterministic sign (largest-
//! magnitude entry positive) and eigenpairs are returned sorted by descending
//! eigenvalue, which is the ordering the coefficient-recovery step relies on.

use super::SymMatrix;
use crate::error::{BekkError, Result};
use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a symmetric matrix, sorted descending by eigenvalue.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Reassembles `sum_k lambda_k u_k u_k^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.vectors.nrows();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..self.values.len() {
            let u = self.vectors.column(k);
            m.ger(self.values[k], &u, &u, 1.0);
        }
        m
    }
}

/// Eigendecomposition of a symmetric matrix.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.n();
    let mut z = m.as_matrix().clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e)?;

    // sort descending; stable on index for deterministic tie handling
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap().then(a.cmp(&b)));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        values[k] = d[src];
        let mut col = z.column(src).clone_owned();
        fix_sign(&mut col);
        vectors.set_column(k, &col);
    }
    Ok(SymEigen { values, vectors })
}

/// Makes the largest-magnitude entry positive (first occurrence wins ties).
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Projection onto the cone of symmetric PSD matrices with an eigenvalue
/// floor: eigenvalues below `floor` are raised to it.
///
/// `floor = 0` yields the Frobenius-nearest PSD matrix; callers that need
/// invertibility pass a positive floor.
pub fn psd_project(m: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if floor < 0.0 {
        return Err(BekkError::invalid("psd_project floor must be >= 0"));
    }
    let eig = sym_eigen(m)?;
    if eig.values.iter().all(|&l| l >= floor) {
        return Ok(m.clone());
    }
    let n = m.n();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.values[k].max(floor);
        if l != 0.0 {
            let u = eig.vectors.column(k);
            out.ger(l, &u, &u, 1.0);
        }
    }
    SymMatrix::symmetrize(&out)
}

/// Symmetric PSD square root `M^{1/2} = U diag(sqrt(max(lambda, 0))) U^T`.
///
/// Tiny negative eigenvalues from rounding are clipped; a materially
/// indefinite input is an error.
pub fn psd_sqrt(m: &SymMatrix) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m)?;
    let scale = eig.values[0].abs().max(1.0);
    let n = m.n();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.values[k];
        if l < -1e-8 * scale {
            return Err(BekkError::numeric(format!(
                "square root of an indefinite matrix (eigenvalue {l})"
            )));
        }
        let s = l.max(0.0).sqrt();
        if s != 0.0 {
            let u = eig.vectors.column(k);
            out.ger(s, &u, &u, 1.0);
        }
    }
    Ok(out)
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
/// On exit `z` holds the accumulated orthogonal transform, `d` the diagonal,
/// and `e[1..]` the subdiagonal.
fn tred2(z: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = z.nrows();
    if n == 0 {
        return;
    }
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += z[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..=l {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut fsum = 0.0;
                for j in 0..=l {
                    z[(j, i)] = z[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[(j, k)] * z[(i, k)];
                    }
                    for k in j + 1..=l {
                        g += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g / h;
                    fsum += e[j] * z[(i, j)];
                }
                let hh = fsum / (h + h);
                for j in 0..=l {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[(j, k)] -= f * e[k] + g * z[(i, k)];
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[(i, k)] * z[(k, j)];
                }
                for k in 0..i {
                    let zk = z[(k, i)];
                    z[(k, j)] -= g * zk;
                }
            }
        }
        d[i] = z[(i, i)];
        z[(i, i)] = 1.0;
        for j in 0..i {
            z[(j, i)] = 0.0;
            z[(i, j)] = 0.0;
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, with the
/// orthogonal transform accumulated into `z`. Caps at 30 sweeps per value.
fn tql2(z: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 30 {
                return Err(BekkError::numeric(
                    "symmetric QL iteration failed to converge within 30 sweeps",
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // deflate without finishing the sweep
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
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
    fn identity_spectrum() {
        let eig = sym_eigen(&SymMatrix::identity(3)).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(eig.values[k], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_sorted_descending() {
        let m = SymMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = sym_eigen(&m).unwrap();
        assert_abs_diff_eq!(eig.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for n in [1usize, 2, 3, 5, 9, 16] {
            let m = random_sym(n, 1234 + n as u64);
            let eig = sym_eigen(&m).unwrap();
            let rec = eig.reconstruct();
            let denom = m.as_matrix().norm().max(1.0);
            assert!(
                (&rec - m.as_matrix()).norm() / denom < 1e-8,
                "reconstruction residual too large for n={n}"
            );
            let gram = eig.vectors.transpose() * &eig.vectors;
            assert_abs_diff_eq!(gram, DMatrix::identity(n, n), epsilon = 1e-10);
        }
    }

    #[test]
    fn sign_convention() {
        let m = random_sym(6, 99);
        let eig = sym_eigen(&m).unwrap();
        for k in 0..6 {
            let col = eig.vectors.column(k);
            let max = col.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn psd_project_fixed_point() {
        let spd = {
            let a = random_sym(4, 5).into_matrix();
            SymMatrix::symmetrize(&(&a * a.transpose() + DMatrix::identity(4, 4))).unwrap()
        };
        let proj = psd_project(&spd, 0.0).unwrap();
        assert!((proj.as_matrix() - spd.as_matrix()).norm() < 1e-10);
    }

    #[test]
    fn psd_project_clips_eigenvalues() {
        let m = SymMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]));
        let proj = psd_project(&m, 0.0).unwrap();
        assert_abs_diff_eq!(proj[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(proj[(1, 1)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(proj[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn psd_project_floor_respected() {
        let m = random_sym(5, 31);
        let proj = psd_project(&m, 1e-4).unwrap();
        let eig = sym_eigen(&proj).unwrap();
        for &l in eig.values.iter() {
            assert!(l >= 1e-4 - 1e-12);
        }
    }

    #[test]
    fn psd_project_idempotent() {
        let m = random_sym(6, 77);
        let p1 = psd_project(&m, 0.0).unwrap();
        let p2 = psd_project(&p1, 0.0).unwrap();
        assert!((p1.as_matrix() - p2.as_matrix()).norm() < 1e-9);
    }

    #[test]
    fn rejects_negative_floor() {
        assert!(psd_project(&SymMatrix::identity(2), -1.0).is_err());
    }
}
