//! Return panels, data truncation, and construction of the stacked
//! regression from truncated returns.
//!
//! The response row at time `t` is `vech(r_t(tau) r_t(tau)^T)` and the
//! regressor row is `(1, y_{t-1}(tau)^T, ..., y_{t-p}(tau)^T)`. The first `p`
//! observations are dropped rather than zero-padded, so every regressor row
//! is fully observed. `tau = f64::INFINITY` is the untruncated sentinel and
//! is accepted by every entry point.

use crate::error::{BekkError, Result};
use crate::linalg::index::{vech_index, vech_len};
use nalgebra::{DMatrix, DVector, RowDVector};

/// Panel of (optionally centered) asset returns, rows = time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    /// Wraps a `T x N` matrix of returns; all entries must be finite.
    pub fn new(returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() == 0 || returns.ncols() == 0 {
            return Err(BekkError::data("return panel must be non-empty"));
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(BekkError::data("return panel contains non-finite entries"));
        }
        Ok(ReturnPanel { returns })
    }

    /// Number of observations.
    pub fn t(&self) -> usize {
        self.returns.nrows()
    }

    /// Number of assets.
    pub fn n(&self) -> usize {
        self.returns.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn row(&self, t: usize) -> RowDVector<f64> {
        self.returns.row(t).into_owned()
    }

    /// Subtracts column means; the estimator itself assumes centered input.
    pub fn centered(&self) -> ReturnPanel {
        let mut m = self.returns.clone();
        for j in 0..m.ncols() {
            let mean = m.column(j).mean();
            for i in 0..m.nrows() {
                m[(i, j)] -= mean;
            }
        }
        ReturnPanel { returns: m }
    }

    /// Panel restricted to the first `t` rows.
    pub fn head(&self, t: usize) -> Result<ReturnPanel> {
        if t == 0 || t > self.t() {
            return Err(BekkError::invalid(format!(
                "cannot take {t} rows from a panel of length {}",
                self.t()
            )));
        }
        Ok(ReturnPanel { returns: self.returns.rows(0, t).into_owned() })
    }
}

fn validate_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(BekkError::invalid(format!("truncation level must be positive, got {tau}")));
    }
    Ok(())
}

/// Element-wise sign-preserving clamp of returns at level `tau`.
pub fn truncate_returns(panel: &ReturnPanel, tau: f64) -> Result<ReturnPanel> {
    validate_tau(tau)?;
    if tau.is_infinite() {
        return Ok(panel.clone());
    }
    let m = panel.returns.map(|v| v.signum() * v.abs().min(tau));
    Ok(ReturnPanel { returns: m })
}

/// Stacked regression built from truncated returns.
#[derive(Debug, Clone)]
pub struct TruncatedDesign {
    /// Truncation level at the return scale (`INFINITY` = untruncated).
    pub tau: f64,
    /// Lag order.
    pub p: usize,
    /// Number of assets.
    pub n_assets: usize,
    /// Response, `(T - p) x d` with `d = N(N+1)/2`.
    pub y: DMatrix<f64>,
    /// Regressors, `(T - p) x (p d + 1)`; first column identically one.
    pub x: DMatrix<f64>,
}

impl TruncatedDesign {
    /// Vech dimension `d`.
    pub fn d(&self) -> usize {
        vech_len(self.n_assets)
    }

    /// Effective number of rows.
    pub fn rows(&self) -> usize {
        self.y.nrows()
    }
}

/// Half-vectorized outer product `vech(r r^T)` of a single return row.
fn vech_outer(n: usize, r: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(vech_len(n));
    for c in 0..n {
        for q in c..n {
            out[vech_index(n, q, c)] = r[q] * r[c];
        }
    }
    out
}

/// Builds the truncated response and design matrices at lag order `p`.
///
/// Rows cover `t = p..T-1`; row `t - p` of `x` holds
/// `(1, y_{t-1}(tau)^T, ..., y_{t-p}(tau)^T)`, matching the stacking of the
/// coefficient matrix (intercept first, then lag blocks).
pub fn build_design(panel: &ReturnPanel, p: usize, tau: f64) -> Result<TruncatedDesign> {
    validate_tau(tau)?;
    if p == 0 {
        return Err(BekkError::invalid("lag order must be >= 1"));
    }
    if panel.t() <= p {
        return Err(BekkError::invalid(format!(
            "panel has {} rows, need more than p = {p}",
            panel.t()
        )));
    }
    let truncated = truncate_returns(panel, tau)?;
    let n = panel.n();
    let d = vech_len(n);
    let rows = panel.t() - p;

    // vech rows once, reused by both response and lagged regressors
    let mut vech_rows = Vec::with_capacity(panel.t());
    for t in 0..panel.t() {
        let r = truncated.returns.row(t).transpose();
        vech_rows.push(vech_outer(n, &r));
    }

    let mut y = DMatrix::zeros(rows, d);
    let mut x = DMatrix::zeros(rows, p * d + 1);
    for t in p..panel.t() {
        let out = t - p;
        for q in 0..d {
            y[(out, q)] = vech_rows[t][q];
        }
        x[(out, 0)] = 1.0;
        for lag in 1..=p {
            let base = 1 + (lag - 1) * d;
            let src = &vech_rows[t - lag];
            for q in 0..d {
                x[(out, base + q)] = src[q];
            }
        }
    }
    Ok(TruncatedDesign { tau, p, n_assets: n, y, x })
}

/// Regressor vector `(1, y_{t-1}(tau)^T, ..., y_{t-p}(tau)^T)` for
/// forecasting the observation at index `t` (so lags `t-1..t-p` must exist).
pub fn regressor_at(panel: &ReturnPanel, p: usize, tau: f64, t: usize) -> Result<DVector<f64>> {
    validate_tau(tau)?;
    if t < p || t > panel.t() {
        return Err(BekkError::invalid(format!(
            "regressor at t = {t} needs {p} preceding observations"
        )));
    }
    let n = panel.n();
    let d = vech_len(n);
    let mut x = DVector::zeros(p * d + 1);
    x[0] = 1.0;
    for lag in 1..=p {
        let mut r = panel.returns.row(t - lag).transpose();
        if tau.is_finite() {
            r = r.map(|v| v.signum() * v.abs().min(tau));
        }
        let v = vech_outer(n, &r);
        let base = 1 + (lag - 1) * d;
        for q in 0..d {
            x[base + q] = v[q];
        }
    }
    Ok(x)
}
