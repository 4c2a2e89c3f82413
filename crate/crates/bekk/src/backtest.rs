//! Conditional covariance forecasting, minimum-variance portfolios, and the
//! expanding-window one-step backtest with annualized performance metrics.
//!
//! Six portfolio constructions are supported: the direct vech forecast with
//! and without truncation, the recovered-coefficient recursion under the
//! nuclear or top-eigenvalue split loss (the untruncated variant under the
//! nuclear loss), and the equal-weight baseline. Model selection runs once
//! on the initial window and is held fixed across origins; `(lambda, tau)`
//! likewise.

use crate::design::{regressor_at, ReturnPanel};
use crate::error::{BekkError, Result};
use crate::fista::CoefStack;
use crate::linalg::{psd_project, vech_inv_raw, SymMatrix};
use crate::recovery::{recover_bekk, AdamConfig, BekkParams, WLoss};
use crate::select::{fit_prefix, select_p, tune_lambda_tau, SelectConfig};
use crate::simulate::McFistaConfig;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Trading days per year used by the annualization.
pub const TRADING_DAYS: f64 = 252.0;

/// Which conditional-covariance estimator drives the portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovEstimatorKind {
    /// Projected vech forecast from the truncated fit.
    VechDirect,
    /// Recovered-coefficient recursion, nuclear-loss split.
    BekkNuclear,
    /// Recovered-coefficient recursion, top-eigenvalue-loss split.
    BekkTe,
    /// Projected vech forecast without truncation.
    VechDirectNoTrunc,
    /// Recovered-coefficient recursion without truncation, nuclear loss.
    BekkNuclearNoTrunc,
    /// Equal-weight baseline; bypasses covariance estimation entirely.
    EqualWeight,
}

impl CovEstimatorKind {
    fn truncates(&self) -> bool {
        matches!(
            self,
            CovEstimatorKind::VechDirect | CovEstimatorKind::BekkNuclear | CovEstimatorKind::BekkTe
        )
    }

    fn recovers(&self) -> bool {
        matches!(
            self,
            CovEstimatorKind::BekkNuclear
                | CovEstimatorKind::BekkTe
                | CovEstimatorKind::BekkNuclearNoTrunc
        )
    }
}

/// Backtest settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub kind: CovEstimatorKind,
    /// Share of observations reserved for evaluation (latest part).
    pub test_fraction: f64,
    /// Lag order; `None` selects by BIC on the initial window.
    pub p: Option<usize>,
    /// Component counts; `None` selects by the ridge estimator.
    pub k: Option<Vec<usize>>,
    /// Penalty level; `None` tunes on the initial window.
    pub lambda: Option<f64>,
    /// Truncation level; `None` tunes on the initial window. JSON accepts
    /// a number or the string `"inf"`.
    #[serde(
        deserialize_with = "crate::serde_util::deserialize_tau_opt",
        serialize_with = "crate::serde_util::serialize_tau_opt"
    )]
    pub tau: Option<f64>,
    /// Refit cadence in origins (1 = refit daily).
    pub refit_every: usize,
    /// Eigenvalue floor guaranteeing invertible covariance forecasts.
    pub floor: f64,
    /// Additional floor relative to the forecast's largest eigenvalue
    /// (a condition-number cap on the inverted matrix); 0 disables. Guards
    /// the weights when a noisy fit pushes forecasts toward singularity.
    pub relative_floor: f64,
    pub select: SelectConfig,
    pub fista: McFistaConfig,
    pub adam: AdamConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            kind: CovEstimatorKind::VechDirect,
            test_fraction: 0.2,
            p: None,
            k: None,
            lambda: None,
            tau: None,
            refit_every: 1,
            floor: 1e-8,
            relative_floor: 0.0,
            select: SelectConfig::default(),
            fista: McFistaConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

/// Backtest outcome: realized portfolio returns and annualized metrics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BacktestReport {
    pub kind: CovEstimatorKind,
    /// First forecast origin (0-based row index of the first test return).
    pub t0: usize,
    /// Realized one-step portfolio returns, one per evaluated origin.
    pub returns: Vec<f64>,
    /// Origins skipped because the refit failed.
    pub skipped: Vec<usize>,
    /// Annualized mean return.
    pub av: f64,
    /// Annualized standard deviation.
    pub sd: f64,
    /// Information ratio `av / sd`; undefined when `sd == 0`.
    pub ir: Option<f64>,
    pub p: usize,
    pub k: Vec<usize>,
    pub lambda: f64,
    pub tau: f64,
    /// Mean wall time per origin in seconds.
    pub secs_per_origin: f64,
}

/// Direct covariance forecast: PSD projection of the vech forecast.
pub fn sigma_hat(theta: &CoefStack, x: &DVector<f64>, floor: f64) -> Result<SymMatrix> {
    let fc = theta.predict(x)?;
    psd_project(&vech_inv_raw(&fc)?, floor)
}

/// Recovered-coefficient covariance recursion on raw lagged returns.
/// `recent[i]` is the return `i + 1` steps back.
pub fn sigma_tilde(params: &BekkParams, recent: &[DVector<f64>]) -> Result<SymMatrix> {
    if recent.len() != params.p() {
        return Err(BekkError::invalid(format!(
            "expected {} lagged returns, got {}",
            params.p(),
            recent.len()
        )));
    }
    let mut sigma = params.omega.as_matrix().clone();
    for (lag, r) in recent.iter().enumerate() {
        for comp in &params.a[lag] {
            let ar = comp * r;
            sigma.ger(1.0, &ar, &ar, 1.0);
        }
    }
    SymMatrix::symmetrize(&sigma)
}

/// Minimum-variance weights `Sigma^{-1} 1 / (1^T Sigma^{-1} 1)`.
pub fn mv_weights(sigma: &SymMatrix) -> Result<DVector<f64>> {
    let chol = nalgebra::Cholesky::new(sigma.as_matrix().clone())
        .ok_or_else(|| BekkError::numeric("covariance not positive definite for weights"))?;
    let ones = DVector::from_element(sigma.n(), 1.0);
    let solved = chol.solve(&ones);
    let denom = solved.sum();
    if denom.abs() < 1e-300 {
        return Err(BekkError::numeric("degenerate minimum-variance normalization"));
    }
    Ok(solved / denom)
}

struct OriginModel {
    theta: CoefStack,
    bekk: Option<BekkParams>,
}

fn fit_model(
    panel: &ReturnPanel,
    n_obs: usize,
    p: usize,
    ks: &[usize],
    lambda: f64,
    tau: f64,
    cfg: &BacktestConfig,
) -> Result<OriginModel> {
    let fit = fit_prefix(panel, p, tau, n_obs, &cfg.fista.to_fista(lambda))?;
    let bekk = if cfg.kind.recovers() {
        let loss = match cfg.kind {
            CovEstimatorKind::BekkTe => WLoss::TopEigen(0), // per-lag count filled in recover_bekk
            _ => WLoss::Nuclear,
        };
        Some(recover_bekk(&fit.theta, ks, loss, &cfg.adam, cfg.floor)?)
    } else {
        None
    };
    Ok(OriginModel { theta: fit.theta, bekk })
}

fn forecast_weights(
    panel: &ReturnPanel,
    model: &OriginModel,
    origin: usize,
    p: usize,
    tau: f64,
    cfg: &BacktestConfig,
) -> Result<DVector<f64>> {
    let raw = if let Some(bekk) = &model.bekk {
        let recent: Vec<DVector<f64>> =
            (1..=p).map(|lag| panel.row(origin - lag).transpose()).collect();
        sigma_tilde(bekk, &recent)?
    } else {
        let x = regressor_at(panel, p, tau, origin)?;
        let fc = model.theta.predict(&x)?;
        crate::linalg::vech_inv_raw(&fc)?
    };
    let floor = if cfg.relative_floor > 0.0 {
        let top = crate::linalg::sym_eigen(&raw)?.values[0].max(0.0);
        cfg.floor.max(cfg.relative_floor * top)
    } else {
        cfg.floor
    };
    mv_weights(&psd_project(&raw, floor)?)
}

/// Expanding-window one-step backtest over the reserved evaluation tail.
pub fn run_backtest(panel: &ReturnPanel, cfg: &BacktestConfig) -> Result<BacktestReport> {
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(BekkError::invalid("test fraction must lie in (0, 1)"));
    }
    if cfg.refit_every == 0 {
        return Err(BekkError::invalid("refit cadence must be >= 1"));
    }
    let t = panel.t();
    let test_len = ((t as f64) * cfg.test_fraction).floor() as usize;
    if test_len == 0 {
        return Err(BekkError::invalid("evaluation window is empty"));
    }
    let t0 = t - test_len;
    let started = std::time::Instant::now();

    // equal weight needs no model at all
    if cfg.kind == CovEstimatorKind::EqualWeight {
        let n = panel.n() as f64;
        let returns: Vec<f64> = (t0..t).map(|r| panel.row(r).sum() / n).collect();
        return Ok(finish_report(cfg.kind, t0, returns, Vec::new(), 0, vec![0; 0], 0.0, f64::NAN, started));
    }

    let train = panel.head(t0)?;
    let fista0 = cfg.fista.to_fista(0.0);

    // resolve (lambda, tau) once on the initial window
    let forced_tau = if cfg.kind.truncates() { cfg.tau } else { Some(f64::INFINITY) };
    let (lambda, tau) = match (cfg.lambda, forced_tau) {
        (Some(l), Some(tv)) => (l, tv),
        _ => {
            let mut sel = cfg.select.clone();
            if let Some(tv) = forced_tau {
                sel.tau_grid = vec![tv];
            }
            if let Some(l) = cfg.lambda {
                sel.lambda_grid = vec![l];
            }
            let p_for_tune = cfg.p.unwrap_or(sel.p_max);
            let tuned = tune_lambda_tau(&train, p_for_tune, &sel, &fista0)?;
            (cfg.lambda.unwrap_or(tuned.lambda), forced_tau.unwrap_or(tuned.tau))
        }
    };

    // resolve the lag order once
    let p = match cfg.p {
        Some(p) => p,
        None => select_p(&train, &cfg.select, &fista0, Some((lambda, tau)))?.p,
    };
    if t0 <= p + 2 {
        return Err(BekkError::invalid("initial window too short for the lag order"));
    }

    // resolve component counts once when the recursion needs them
    let ks: Vec<usize> = if cfg.kind.recovers() {
        match &cfg.k {
            Some(k) => {
                if k.len() != p {
                    return Err(BekkError::invalid(format!(
                        "expected {p} component counts, got {}",
                        k.len()
                    )));
                }
                k.clone()
            }
            None => {
                let report = crate::select::select_and_fit(
                    &train,
                    &crate::select::PipelineConfig {
                        select: SelectConfig {
                            p_max: p,
                            lambda_grid: vec![lambda],
                            tau_grid: vec![tau],
                            ..cfg.select.clone()
                        },
                        fista: cfg.fista.to_fista(lambda),
                        adam: cfg.adam.clone(),
                        use_te_loss: false,
                        floor: cfg.floor,
                        skip_recovery: false,
                    },
                )?;
                report.selected_k
            }
        }
    } else {
        Vec::new()
    };

    // origins grouped by refit cadence; chunks are independent given the
    // panel, so they evaluate in parallel and re-assemble in order
    let chunks: Vec<usize> = (t0..t).step_by(cfg.refit_every).collect();
    let outcomes: Vec<Vec<(usize, Result<f64>)>> = chunks
        .par_iter()
        .map(|&start| {
            let end = (start + cfg.refit_every).min(t);
            let mut out = Vec::with_capacity(end - start);
            match fit_model(panel, start, p, &ks, lambda, tau, cfg) {
                Ok(model) => {
                    for origin in start..end {
                        let z = forecast_weights(panel, &model, origin, p, tau, cfg)
                            .map(|w| w.dot(&panel.row(origin).transpose()));
                        out.push((origin, z));
                    }
                }
                Err(e) => {
                    out.push((start, Err(e)));
                    for origin in start + 1..end {
                        out.push((
                            origin,
                            Err(BekkError::numeric("refit failed earlier in this chunk")),
                        ));
                    }
                }
            }
            out
        })
        .collect();

    let mut returns = Vec::with_capacity(test_len);
    let mut skipped = Vec::new();
    for chunk in outcomes {
        for (origin, z) in chunk {
            match z {
                Ok(v) => returns.push(v),
                Err(_) => skipped.push(origin),
            }
        }
    }
    Ok(finish_report(cfg.kind, t0, returns, skipped, p, ks, lambda, tau, started))
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    kind: CovEstimatorKind,
    t0: usize,
    returns: Vec<f64>,
    skipped: Vec<usize>,
    p: usize,
    k: Vec<usize>,
    lambda: f64,
    tau: f64,
    started: std::time::Instant,
) -> BacktestReport {
    let n = returns.len();
    let (av, sd) = annualized_moments(&returns);
    let ir = if sd > 0.0 { Some(av / sd) } else { None };
    let secs = started.elapsed().as_secs_f64() / n.max(1) as f64;
    BacktestReport { kind, t0, returns, skipped, av, sd, ir, p, k, lambda, tau, secs_per_origin: secs }
}

/// Annualized mean (times 252) and standard deviation (times sqrt(252),
/// sample variance with n-1 denominator).
pub fn annualized_moments(returns: &[f64]) -> (f64, f64) {
    let n = returns.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let av = mean * TRADING_DAYS;
    if n == 1 {
        return (av, 0.0);
    }
    let var = returns.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (n as f64 - 1.0);
    (av, var.sqrt() * TRADING_DAYS.sqrt())
}
