//! Recovery of the original BEKK coefficients from the fitted stack: the
//! intercept maps back through a PSD projection, and each lag matrix goes
//! through the padding/rearrangement construction, a gradient-based search
//! for the split matrix `W`, and a spectral decomposition.
//!
//! The `W` search minimizes a spectral loss of `rearrange(pad(phi, W))`,
//! either the nuclear norm (convex relaxation of the minimal-rank property)
//! or a top-eigenvalue loss that rewards mass on the leading `K` eigenvalues
//! while squashing the tail. Both `pad` and `rearrange` are linear in `W`,
//! so gradients are exact adjoints of the matrix (sub)gradient - no numeric
//! differentiation over the g^2 parameters.

use crate::error::{BekkError, Result};
use crate::fista::CoefStack;
use crate::linalg::index::{n_from_vech_len, pair_len};
use crate::linalg::{
    half_split, pad, pad_adjoint_w, psd_project, rearrange, rearrange_adjoint, sym_eigen,
    vech_inv_raw, PadAux, SymMatrix,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::linalg::pad::half_split as w_half_split;

/// Recovered BEKK parameters: intercept covariance plus per-lag component
/// matrices, each lag sorted by descending Frobenius norm with the sign
/// convention applied (largest-magnitude entry positive).
#[derive(Debug, Clone)]
pub struct BekkParams {
    pub omega: SymMatrix,
    /// `a[i][k]` is the k-th component matrix at lag i+1.
    pub a: Vec<Vec<DMatrix<f64>>>,
}

impl BekkParams {
    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn n(&self) -> usize {
        self.omega.n()
    }

    pub fn component_counts(&self) -> Vec<usize> {
        self.a.iter().map(|lag| lag.len()).collect()
    }
}

/// Adam settings for the `W` search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub iters: usize,
    /// Entries of `W` below this magnitude are zeroed after each step;
    /// 0 disables. Keeps the padded matrix sparse at large `N`.
    pub sparsify_threshold: f64,
    /// Total multiplicative learning-rate decay across the run (1 = none).
    /// The spectral losses are non-smooth at their minima, so the terminal
    /// step size bounds the achievable resolution.
    pub lr_decay: f64,
    /// Start from the half-split of the merged coefficients instead of zero.
    pub half_split_init: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            iters: 2000,
            sparsify_threshold: 0.0,
            lr_decay: 1e-3,
            half_split_init: true,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(BekkError::invalid("adam lr must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(BekkError::invalid("adam betas must lie in [0, 1)"));
        }
        if self.iters == 0 {
            return Err(BekkError::invalid("adam iteration count must be >= 1"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(BekkError::invalid("adam lr_decay must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Spectral loss used for the `W` search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WLoss {
    /// Nuclear norm of the rearranged padded matrix.
    Nuclear,
    /// Top-eigenvalue loss with the given component count.
    TopEigen(usize),
}

/// Bias-corrected first-order optimizer state over a matrix of parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: DMatrix<f64>,
    v: DMatrix<f64>,
    t: usize,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState { m: DMatrix::zeros(rows, cols), v: DMatrix::zeros(rows, cols), t: 0 }
    }

    /// One Adam update of `params` in place at the configured base rate.
    pub fn step(&mut self, params: &mut DMatrix<f64>, grad: &DMatrix<f64>, cfg: &AdamConfig) {
        self.step_with_lr(params, grad, cfg, cfg.lr);
    }

    /// One Adam update with an explicit step size (for decay schedules).
    pub fn step_with_lr(
        &mut self,
        params: &mut DMatrix<f64>,
        grad: &DMatrix<f64>,
        cfg: &AdamConfig,
        lr: f64,
    ) {
        self.t += 1;
        let b1 = cfg.beta1;
        let b2 = cfg.beta2;
        self.m = &self.m * b1 + grad * (1.0 - b1);
        self.v = &self.v * b2 + grad.map(|g| g * g) * (1.0 - b2);
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.nrows() {
            for j in 0..params.ncols() {
                let mhat = self.m[(i, j)] / bc1;
                let vhat = self.v[(i, j)] / bc2;
                params[(i, j)] -= lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }
}

/// Intercept recovery: `Omega = P(vech^{-1}(omega))` with eigenvalue floor.
pub fn recover_omega(theta: &CoefStack, floor: f64) -> Result<SymMatrix> {
    let omega = theta.omega();
    psd_project(&vech_inv_raw(&omega)?, floor)
}

/// Nuclear norm: sum of singular values. Symmetric inputs use the sum of
/// absolute eigenvalues directly.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == m.ncols() {
        if let Ok(sym) = SymMatrix::new(m.clone()) {
            let eig = sym_eigen(&sym)?;
            return Ok(eig.values.iter().map(|l| l.abs()).sum());
        }
    }
    // general case through the Gram spectrum
    let gram = SymMatrix::symmetrize(&(m.transpose() * m))?;
    let eig = sym_eigen(&gram)?;
    Ok(eig.values.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Top-eigenvalue loss: `-sum_{j<=K} lambda_j + sum_{j>K} lambda_j^2` with
/// eigenvalues sorted descending.
pub fn te_loss(m: &SymMatrix, k: usize) -> Result<f64> {
    let side = m.n();
    if k == 0 || k > side {
        return Err(BekkError::invalid(format!("component count {k} out of range 1..={side}")));
    }
    let eig = sym_eigen(m)?;
    let mut loss = 0.0;
    for (j, &l) in eig.values.iter().enumerate() {
        if j < k {
            loss -= l;
        } else {
            loss += l * l;
        }
    }
    Ok(loss)
}

/// Loss value and matrix (sub)gradient of the spectral loss at a symmetric
/// point, from one eigendecomposition.
fn spectral_loss_grad(s: &SymMatrix, loss: WLoss) -> Result<(f64, DMatrix<f64>)> {
    let eig = sym_eigen(s)?;
    let n = s.n();
    let mut grad = DMatrix::zeros(n, n);
    let mut value = 0.0;
    match loss {
        WLoss::Nuclear => {
            for j in 0..n {
                let l = eig.values[j];
                value += l.abs();
                let sg = if l > 0.0 {
                    1.0
                } else if l < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                if sg != 0.0 {
                    let u = eig.vectors.column(j);
                    grad.ger(sg, &u, &u, 1.0);
                }
            }
        }
        WLoss::TopEigen(k) => {
            if k == 0 || k > n {
                return Err(BekkError::invalid(format!(
                    "component count {k} out of range 1..={n}"
                )));
            }
            for j in 0..n {
                let l = eig.values[j];
                let u = eig.vectors.column(j);
                if j < k {
                    value -= l;
                    grad.ger(-1.0, &u, &u, 1.0);
                } else {
                    value += l * l;
                    grad.ger(2.0 * l, &u, &u, 1.0);
                }
            }
        }
    }
    Ok((value, grad))
}

/// Evaluates `loss(rearrange(pad(phi, w)))` and its gradient with respect to
/// `w` through the exact linear adjoints.
pub fn w_objective_grad(
    phi: &DMatrix<f64>,
    w: &PadAux,
    loss: WLoss,
) -> Result<(f64, DMatrix<f64>)> {
    let n = n_from_vech_len(phi.nrows())
        .ok_or_else(|| BekkError::invalid("coefficient side is not n(n+1)/2"))?;
    let padded = pad(phi, w)?;
    let s = SymMatrix::symmetrize(&rearrange(&padded)?)?;
    let (value, mat_grad) = spectral_loss_grad(&s, loss)?;
    let dh = rearrange_adjoint(&mat_grad)?;
    let grad = pad_adjoint_w(&dh, n)?;
    Ok((value, grad))
}

/// Gradient-based search for the split matrix `W` minimizing the spectral
/// loss of the rearranged padded matrix. Returns the best iterate by loss.
pub fn solve_w(phi: &DMatrix<f64>, loss: WLoss, cfg: &AdamConfig) -> Result<PadAux> {
    cfg.validate()?;
    let n = n_from_vech_len(phi.nrows())
        .ok_or_else(|| BekkError::invalid("coefficient side is not n(n+1)/2"))?;
    let g = pair_len(n);
    if g == 0 {
        return Ok(PadAux::zeros(0));
    }
    let mut w = if cfg.half_split_init {
        half_split(phi)?.into_matrix()
    } else {
        DMatrix::zeros(g, g)
    };
    let mut adam = AdamState::new(g, g);
    let mut best_w = w.clone();
    let mut best_loss = f64::INFINITY;

    for iter in 0..cfg.iters {
        let (value, grad) = w_objective_grad(phi, &PadAux::new(w.clone())?, loss)?;
        if !value.is_finite() {
            return Err(BekkError::numeric("W search diverged to a non-finite loss"));
        }
        if value < best_loss {
            best_loss = value;
            best_w.copy_from(&w);
        }
        let frac = iter as f64 / cfg.iters.max(1) as f64;
        let lr = cfg.lr * cfg.lr_decay.powf(frac);
        adam.step_with_lr(&mut w, &grad, cfg, lr);
        if cfg.sparsify_threshold > 0.0 {
            w.apply(|v| {
                if v.abs() < cfg.sparsify_threshold {
                    *v = 0.0;
                }
            });
        }
    }
    // final candidate after the last step
    let (value, _) = w_objective_grad(phi, &PadAux::new(w.clone())?, loss)?;
    if value < best_loss {
        best_w = w;
    }
    PadAux::new(best_w)
}

/// Spectral recovery of the component matrices: top-`K` eigenpairs of the
/// rearranged padded matrix, negative eigenvalues clipped at zero, sign
/// convention applied, sorted by descending Frobenius norm.
pub fn recover_a(phi: &DMatrix<f64>, w: &PadAux, k: usize) -> Result<Vec<DMatrix<f64>>> {
    if k == 0 {
        return Err(BekkError::invalid("component count must be >= 1"));
    }
    let n = n_from_vech_len(phi.nrows())
        .ok_or_else(|| BekkError::invalid("coefficient side is not n(n+1)/2"))?;
    if k > n * n {
        return Err(BekkError::invalid(format!(
            "component count {k} exceeds matrix side {}",
            n * n
        )));
    }
    let s = SymMatrix::symmetrize(&rearrange(&pad(phi, w)?)?)?;
    let eig = sym_eigen(&s)?;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = eig.values[j].max(0.0);
        let scale = lambda.sqrt();
        let u = eig.vectors.column(j);
        // column-major unvec of sqrt(lambda) * u
        let mut a = DMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                a[(r, c)] = scale * u[c * n + r];
            }
        }
        apply_sign_convention(&mut a);
        out.push(a);
    }
    sort_components(&mut out);
    Ok(out)
}

/// Flips the sign so the largest-magnitude entry is positive (first
/// occurrence wins ties).
pub fn apply_sign_convention(a: &mut DMatrix<f64>) {
    let mut best = 0.0f64;
    let mut best_abs = -1.0f64;
    for &v in a.iter() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = v;
        }
    }
    if best < 0.0 {
        a.neg_mut();
    }
}

/// Descending Frobenius order; exact ties broken lexicographically on the
/// column-major entries so the ordering is deterministic.
fn sort_components(components: &mut [DMatrix<f64>]) {
    components.sort_by(|a, b| {
        let na = a.norm();
        let nb = b.norm();
        nb.partial_cmp(&na).unwrap().then_with(|| {
            for (x, y) in a.iter().zip(b.iter()) {
                match x.partial_cmp(y).unwrap() {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
}

/// Full recovery pipeline for one fitted stack: intercept projection plus
/// per-lag `W` search and spectral extraction. Lags recover independently
/// and run in parallel.
pub fn recover_bekk(
    theta: &CoefStack,
    ks: &[usize],
    loss: WLoss,
    adam: &AdamConfig,
    floor: f64,
) -> Result<BekkParams> {
    if ks.len() != theta.p() {
        return Err(BekkError::invalid(format!(
            "expected {} component counts, got {}",
            theta.p(),
            ks.len()
        )));
    }
    let omega = recover_omega(theta, floor)?;
    let lags: Vec<Result<Vec<DMatrix<f64>>>> = (1..=theta.p())
        .into_par_iter()
        .map(|lag| {
            let phi = theta.phi(lag)?;
            let loss_for_lag = match loss {
                WLoss::Nuclear => WLoss::Nuclear,
                WLoss::TopEigen(_) => WLoss::TopEigen(ks[lag - 1]),
            };
            let w = solve_w(&phi, loss_for_lag, adam)?;
            recover_a(&phi, &w, ks[lag - 1])
        })
        .collect();
    let mut a = Vec::with_capacity(theta.p());
    for lag in lags {
        a.push(lag?);
    }
    Ok(BekkParams { omega, a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, selectors::compress_kron, true_split, vech, SymMatrix};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn kron_sum(components: &[DMatrix<f64>]) -> DMatrix<f64> {
        let nn = components[0].nrows() * components[0].nrows();
        let mut g = DMatrix::zeros(nn, nn);
        for a in components {
            g += kron(a, a);
        }
        g
    }

    fn phi_of(components: &[DMatrix<f64>]) -> DMatrix<f64> {
        compress_kron(components[0].nrows(), &kron_sum(components)).unwrap()
    }

    #[test]
    fn recover_omega_identity() {
        let omega = vech(&SymMatrix::identity(3));
        let theta = CoefStack::from_parts(omega.as_vector(), &[DMatrix::zeros(6, 6)]).unwrap();
        let rec = recover_omega(&theta, 0.0).unwrap();
        assert_abs_diff_eq!(rec.as_matrix(), &DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn recover_omega_clips_negative_eigenvalue() {
        let omega = vech(&SymMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])));
        let theta = CoefStack::from_parts(omega.as_vector(), &[DMatrix::zeros(3, 3)]).unwrap();
        let rec = recover_omega(&theta, 0.0).unwrap();
        assert_abs_diff_eq!(rec[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rec[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nuclear_norm_examples() {
        assert_abs_diff_eq!(nuclear_norm(&DMatrix::identity(4, 4)).unwrap(), 4.0, epsilon = 1e-10);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let rank1 = &v * v.transpose();
        assert_abs_diff_eq!(nuclear_norm(&rank1).unwrap(), v.norm_squared(), epsilon = 1e-10);
    }

    #[test]
    fn te_loss_diagonal_cases() {
        let m = SymMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 0.0, 0.0]));
        assert_abs_diff_eq!(te_loss(&m, 2).unwrap(), -5.0, epsilon = 1e-12);
        let m = SymMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        assert_abs_diff_eq!(te_loss(&m, 2).unwrap(), -4.0, epsilon = 1e-12);
        assert!(te_loss(&m, 0).is_err());
        assert!(te_loss(&m, 4).is_err());
    }

    #[test]
    fn adam_zero_gradient_no_move() {
        let cfg = AdamConfig::default();
        let mut params = DMatrix::from_element(2, 2, 1.5);
        let mut adam = AdamState::new(2, 2);
        adam.step(&mut params, &DMatrix::zeros(2, 2), &cfg);
        assert_eq!(params, DMatrix::from_element(2, 2, 1.5));
    }

    #[test]
    fn adam_constant_gradient_direction() {
        let cfg = AdamConfig::default();
        let mut params = DMatrix::zeros(1, 1);
        let grad = DMatrix::from_element(1, 1, 3.0);
        let mut adam = AdamState::new(1, 1);
        for _ in 0..100 {
            adam.step(&mut params, &grad, &cfg);
        }
        assert!(params[(0, 0)] < -0.5);
    }

    #[test]
    fn adam_quadratic_bowl() {
        // f(x) = 0.5 ||x - c||^2, gradient x - c
        let cfg = AdamConfig { lr: 1e-2, iters: 5000, ..Default::default() };
        let c = DMatrix::from_row_slice(2, 1, &[0.3, -0.8]);
        let mut x = DMatrix::zeros(2, 1);
        let mut adam = AdamState::new(2, 1);
        for _ in 0..cfg.iters {
            let grad = &x - &c;
            adam.step(&mut x, &grad, &cfg);
        }
        assert!((x - c).norm() < 1e-6);
    }

    #[test]
    fn recover_a_exact_scaled_identity() {
        let a = DMatrix::<f64>::identity(2, 2) * 0.5;
        let comps = vec![a.clone()];
        let phi = phi_of(&comps);
        let w = true_split(&comps).unwrap();
        let rec = recover_a(&phi, &w, 1).unwrap();
        assert!((rec[0].clone() - a).norm() < 1e-10);
    }

    #[test]
    fn recover_a_n2_cross_example() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 0.9]);
        let comps = vec![a.clone()];
        let phi = phi_of(&comps);
        let w = true_split(&comps).unwrap();
        assert_abs_diff_eq!(w.as_matrix()[(0, 0)], 0.06, epsilon = 1e-14);
        let rec = recover_a(&phi, &w, 1).unwrap();
        assert!((rec[0].clone() - a).norm() < 1e-10);
    }

    #[test]
    fn recover_a_rejects_bad_k() {
        let phi = DMatrix::zeros(3, 3);
        let w = PadAux::zeros(1);
        assert!(recover_a(&phi, &w, 0).is_err());
        assert!(recover_a(&phi, &w, 5).is_err());
    }

    #[test]
    fn recover_a_scale_invariance() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 0.9]);
        let comps = vec![a.clone()];
        let phi = phi_of(&comps);
        let w = true_split(&comps).unwrap();
        let c = 4.0;
        let scaled_phi = &phi * c;
        let scaled_w = PadAux::new(w.as_matrix() * c).unwrap();
        let rec = recover_a(&scaled_phi, &scaled_w, 1).unwrap();
        assert!((rec[0].clone() - &a * c.sqrt()).norm() < 1e-9);
    }

    #[test]
    fn sign_convention_flips() {
        let mut a = DMatrix::from_row_slice(2, 2, &[-0.9, 0.2, 0.1, -0.3]);
        apply_sign_convention(&mut a);
        assert_eq!(a[(0, 0)], 0.9);
        let mut b = DMatrix::from_row_slice(1, 2, &[0.5, -0.2]);
        apply_sign_convention(&mut b);
        assert_eq!(b[(0, 0)], 0.5);
    }

    #[test]
    fn solve_w_diagonal_component() {
        // diagonal A: every cross-product is zero, so W = 0 already attains
        // the rank-one optimum
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, 0.4]));
        let comps = vec![a.clone()];
        let phi = phi_of(&comps);
        let cfg = AdamConfig { iters: 800, ..Default::default() };
        let w = solve_w(&phi, WLoss::Nuclear, &cfg).unwrap();
        let s = SymMatrix::symmetrize(&rearrange(&pad(&phi, &w).unwrap()).unwrap()).unwrap();
        let eig = sym_eigen(&s).unwrap();
        assert!(eig.values[1].abs() < 1e-3 * eig.values[0]);
    }
}
