//! Shared test oracles, independent of the library's implementation paths:
//! a cyclic Jacobi eigensolver and a coordinate-descent lasso reference.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(n: usize, m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
}

pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = random_matrix(n, n, rng);
    (&a + a.transpose()) * 0.5
}

/// Cyclic Jacobi eigendecomposition: eigenvalues descending, eigenvectors
/// as columns. Slow and simple; used only to cross-check.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..300 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-28 * (n * n) as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        vectors.set_column(k, &v.column(src));
    }
    (values, vectors)
}

/// Frobenius-nearest PSD matrix by Jacobi eigen-clipping; the reference for
/// the library's projection.
pub fn jacobi_psd_clip(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = jacobi_eigen(m);
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = values[k].max(0.0);
        if l > 0.0 {
            let u = vectors.column(k);
            out += l * &u * u.transpose();
        }
    }
    out
}

/// Cyclic coordinate-descent solver for the column-separable problem
/// `1/(2T) ||Y - X B||_F^2 + lambda ||B||_{1,1}`; the reference minimizer
/// for the accelerated solver.
pub fn cd_lasso(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, sweeps: usize, tol: f64) -> DMatrix<f64> {
    let t = x.nrows() as f64;
    let k = x.ncols();
    let d = y.ncols();
    let col_sq: Vec<f64> = (0..k).map(|j| x.column(j).norm_squared() / t).collect();
    let mut beta = DMatrix::zeros(k, d);
    for col in 0..d {
        let ycol = y.column(col).clone_owned();
        let mut b = DVector::zeros(k);
        let mut resid = ycol.clone();
        for _ in 0..sweeps {
            let mut max_change = 0.0f64;
            for j in 0..k {
                if col_sq[j] == 0.0 {
                    continue;
                }
                let old = b[j];
                let rho = x.column(j).dot(&resid) / t + col_sq[j] * old;
                let new = soft(rho, lambda) / col_sq[j];
                if new != old {
                    resid -= (new - old) * x.column(j);
                    b[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            if max_change < tol {
                break;
            }
        }
        beta.set_column(col, &b);
    }
    beta
}

fn soft(v: f64, lambda: f64) -> f64 {
    v.signum() * (v.abs() - lambda).max(0.0)
}

/// Penalized objective evaluated directly.
pub fn lasso_objective(x: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> f64 {
    let resid = y - x * b;
    resid.norm_squared() / (2.0 * x.nrows() as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Pairwise Frobenius-orthogonal components with strictly descending norms
/// and the positive-sign convention, via Gram-Schmidt in matrix space.
pub fn orthogonal_components(n: usize, k: usize, rng: &mut impl Rng) -> Vec<DMatrix<f64>> {
    let norms: Vec<f64> = (0..k).map(|i| 1.5 * 0.7f64.powi(i as i32)).collect();
    loop {
        let mut comps: Vec<DMatrix<f64>> = Vec::with_capacity(k);
        'outer: for target in norms.iter().take(k) {
            let mut cand = random_matrix(n, n, rng);
            for prev in &comps {
                let coef = (prev.transpose() * &cand).trace() / prev.norm_squared();
                cand -= prev * coef;
            }
            if cand.norm() < 1e-6 {
                comps.clear();
                break 'outer;
            }
            let mut scaled = &cand * (target / cand.norm());
            // sign convention: largest-magnitude entry positive
            let mut best = 0.0f64;
            let mut best_abs = -1.0f64;
            for &v in scaled.iter() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = v;
                }
            }
            if best < 0.0 {
                scaled.neg_mut();
            }
            comps.push(scaled);
        }
        if comps.len() == k {
            return comps;
        }
    }
}

/// `sum_k A_k (x) A_k`.
pub fn kron_sum(components: &[DMatrix<f64>]) -> DMatrix<f64> {
    let nn = components[0].nrows() * components[0].nrows();
    let mut g = DMatrix::zeros(nn, nn);
    for a in components {
        g += bekk::linalg::kron(a, a);
    }
    g
}
