//! Batch command implementations behind the `bekk` binary: configuration
//! schemas (strict JSON, unknown keys rejected), output layout, and the
//! wiring between panels, estimators, and report files.
//!
//! Every output document embeds the fully resolved configuration so a run
//! can be reproduced from its artifacts alone.

use crate::backtest::{run_backtest, BacktestConfig};
use crate::design::ReturnPanel;
use crate::error::{BekkError, Result};
use crate::fista::fit_theta;
use crate::io::{fmt_f64, read_matrix_csv, read_panel_csv, write_matrix_csv, write_panel_csv, write_tidy_csv};
use crate::linalg::index::vech_len;
use crate::recovery::{recover_bekk, solve_w, AdamConfig, BekkParams, WLoss};
use crate::select::{
    pd_proportion, ridge_select_k, select_and_fit, PipelineConfig, SelectConfig,
};
use crate::simulate::{
    generate_and_simulate, run_mc, DgpSpec, McEstimatorConfig, McFistaConfig, McRecord,
};
use crate::linalg::{pad, rearrange, sym_eigen, SymMatrix};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonOpts {
    /// Overrides the seed of seeded commands.
    pub seed: Option<u64>,
    /// Subtract column means from input panels before estimation.
    pub center: bool,
    /// Output directory; created if missing.
    pub out: PathBuf,
}

impl Default for CommonOpts {
    fn default() -> Self {
        CommonOpts { seed: None, center: false, out: PathBuf::from(".") }
    }
}

/// Truncation level in configs: a JSON number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tau(pub f64);

impl Serialize for Tau {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Tau(v)),
            Repr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(Tau(f64::INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BekkError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| BekkError::invalid(format!("config {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| BekkError::invalid(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn ensure_out(opts: &CommonOpts) -> Result<()> {
    std::fs::create_dir_all(&opts.out)?;
    Ok(())
}

fn load_panel(path: &Path, center: bool) -> Result<ReturnPanel> {
    let panel = read_panel_csv(path)?;
    Ok(if center { panel.centered() } else { panel })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn rows_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(BekkError::data("empty matrix in JSON"));
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(BekkError::data("ragged matrix in JSON"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// JSON shape of recovered or ground-truth coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsJson {
    pub n: usize,
    pub p: usize,
    pub k: Vec<usize>,
    pub omega: Vec<Vec<f64>>,
    /// `a[lag][component]` as row-major nested arrays.
    pub a: Vec<Vec<Vec<Vec<f64>>>>,
}

impl ParamsJson {
    pub fn from_params(params: &BekkParams) -> Self {
        ParamsJson {
            n: params.n(),
            p: params.p(),
            k: params.component_counts(),
            omega: matrix_rows(params.omega.as_matrix()),
            a: params
                .a
                .iter()
                .map(|lag| lag.iter().map(matrix_rows).collect())
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<BekkParams> {
        let omega = SymMatrix::new(rows_matrix(&self.omega)?)
            .map_err(|e| BekkError::data(format!("omega: {e}")))?;
        let mut a = Vec::with_capacity(self.a.len());
        for lag in &self.a {
            let mut comps = Vec::with_capacity(lag.len());
            for m in lag {
                comps.push(rows_matrix(m)?);
            }
            a.push(comps);
        }
        Ok(BekkParams { omega, a })
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub dgp: DgpSpec,
    /// Series length kept after burn-in.
    pub t: usize,
    pub burn_in: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { dgp: DgpSpec::default(), t: 500, burn_in: 500 }
    }
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    panel_csv: String,
    params_json: String,
    theta_true_csv: String,
    t: usize,
    n: usize,
    seed: u64,
    config: SimulateConfig,
}

/// Simulates a panel and writes `panel.csv`, `params.json` (ground truth),
/// `theta_true.csv`, and `simulate_report.json`.
pub fn cmd_simulate(config_path: &Path, opts: &CommonOpts) -> Result<()> {
    let mut cfg: SimulateConfig = read_config(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.dgp.seed = seed;
    }
    ensure_out(opts)?;
    let (params, sim) = generate_and_simulate(&cfg.dgp, cfg.t, cfg.burn_in)?;
    let theta = crate::simulate::theta_from_bekk(&params)?;

    write_panel_csv(&opts.out.join("panel.csv"), &sim.panel)?;
    write_json(&opts.out.join("params.json"), &ParamsJson::from_params(&params))?;
    write_matrix_csv(&opts.out.join("theta_true.csv"), theta.as_matrix())?;
    write_json(
        &opts.out.join("simulate_report.json"),
        &SimulateReport {
            panel_csv: "panel.csv".into(),
            params_json: "params.json".into(),
            theta_true_csv: "theta_true.csv".into(),
            t: cfg.t,
            n: cfg.dgp.n,
            seed: cfg.dgp.seed,
            config: cfg,
        },
    )
}

// --------------------------------------------------------------------- fit

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub panel: PathBuf,
    pub p: usize,
    pub lambda: f64,
    pub tau: Tau,
    #[serde(default)]
    pub fista: McFistaConfig,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    1e-10
}

#[derive(Debug, Serialize)]
struct FitJson {
    p: usize,
    lambda: f64,
    tau: Tau,
    objective: f64,
    kkt_residual: f64,
    converged: bool,
    block_iterations: Vec<usize>,
    pd_proportion: f64,
    theta_csv: String,
    config: serde_json::Value,
}

/// Fits the penalized regression at fixed `(p, lambda, tau)` and writes
/// `fit_report.json` plus the dense `theta.csv` sidecar.
pub fn cmd_fit(config_path: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg: FitConfig = read_config(config_path)?;
    ensure_out(opts)?;
    let panel = load_panel(&cfg.panel, opts.center)?;
    let design = crate::design::build_design(&panel, cfg.p, cfg.tau.0)?;
    let fit = fit_theta(&design, &cfg.fista.to_fista(cfg.lambda))?;
    let objective = crate::fista::objective(&design, &fit.theta, cfg.lambda);
    let pd = pd_proportion(&design, &fit.theta)?;
    write_matrix_csv(&opts.out.join("theta.csv"), fit.theta.as_matrix())?;
    write_json(
        &opts.out.join("fit_report.json"),
        &FitJson {
            p: cfg.p,
            lambda: cfg.lambda,
            tau: cfg.tau,
            objective,
            kkt_residual: fit.diagnostics.kkt_residual,
            converged: fit.diagnostics.converged,
            block_iterations: fit.diagnostics.block_iterations,
            pd_proportion: pd,
            theta_csv: "theta.csv".into(),
            config: serde_json::to_value(&cfg).unwrap_or_default(),
        },
    )
}

// ------------------------------------------------------------------ select

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectCmdConfig {
    pub panel: PathBuf,
    pub select: SelectConfig,
    pub fista: McFistaConfig,
    pub adam: AdamConfig,
    pub use_te_loss: bool,
    pub floor: Option<f64>,
    pub skip_recovery: bool,
}

#[derive(Debug, Serialize)]
struct SelectJson {
    selected_p: usize,
    selected_k: Vec<usize>,
    lambda: f64,
    tau: Tau,
    diagnostics: crate::select::ReportDiagnostics,
    theta_csv: String,
    params: Option<ParamsJson>,
    config: serde_json::Value,
}

/// Full pipeline: tune, select the lag order, fit, pick component counts,
/// recover coefficients. Writes `select_report.json` and `theta.csv`.
pub fn cmd_select(config_path: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg: SelectCmdConfig = read_config(config_path)?;
    ensure_out(opts)?;
    let panel = load_panel(&cfg.panel, opts.center)?;
    let pipeline = PipelineConfig {
        select: cfg.select.clone(),
        fista: cfg.fista.to_fista(0.0),
        adam: cfg.adam.clone(),
        use_te_loss: cfg.use_te_loss,
        floor: cfg.floor.unwrap_or(1e-10),
        skip_recovery: cfg.skip_recovery,
    };
    let report = select_and_fit(&panel, &pipeline)?;
    write_matrix_csv(&opts.out.join("theta.csv"), report.theta.as_matrix())?;
    write_json(
        &opts.out.join("select_report.json"),
        &SelectJson {
            selected_p: report.selected_p,
            selected_k: report.selected_k.clone(),
            lambda: report.lambda,
            tau: Tau(report.tau),
            diagnostics: report.diagnostics.clone(),
            theta_csv: "theta.csv".into(),
            params: report.bekk.as_ref().map(ParamsJson::from_params),
            config: serde_json::to_value(&cfg).unwrap_or_default(),
        },
    )
}

// ----------------------------------------------------------------- recover

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    /// Dense coefficient stack, `(p d + 1) x d`.
    pub theta: PathBuf,
    pub n: usize,
    pub p: usize,
    /// Component counts per lag; omitted means ridge selection, which then
    /// needs `rows_for_ridge` (the effective sample size of the fit).
    #[serde(default)]
    pub k: Option<Vec<usize>>,
    #[serde(default)]
    pub rows_for_ridge: Option<usize>,
    #[serde(default)]
    pub select: SelectConfig,
    /// `"nuclear"` or `"top_eigen"`.
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_loss() -> String {
    "nuclear".into()
}

#[derive(Debug, Serialize)]
struct RecoverJson {
    params: ParamsJson,
    loss: String,
    config: serde_json::Value,
}

/// Recovers BEKK coefficients from a fitted stack stored as CSV and writes
/// `params.json`.
pub fn cmd_recover(config_path: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg: RecoverConfig = read_config(config_path)?;
    ensure_out(opts)?;
    let values = read_matrix_csv(&cfg.theta)?;
    let d = vech_len(cfg.n);
    let theta = crate::fista::CoefStack::new(cfg.p, d, values)
        .map_err(|e| BekkError::data(format!("{}: {e}", cfg.theta.display())))?;

    let ks: Vec<usize> = match &cfg.k {
        Some(k) => {
            if k.len() != cfg.p {
                return Err(BekkError::invalid(format!(
                    "expected {} component counts, got {}",
                    cfg.p,
                    k.len()
                )));
            }
            k.clone()
        }
        None => {
            let rows = cfg.rows_for_ridge.ok_or_else(|| {
                BekkError::invalid("ridge selection needs rows_for_ridge when k is omitted")
            })?;
            let k_cap = cfg.select.k_max.min(cfg.n * cfg.n - 1).max(1);
            let ridge_cfg = SelectConfig { k_max: k_cap, ..cfg.select.clone() };
            let mut ks = Vec::with_capacity(cfg.p);
            for lag in 1..=cfg.p {
                let phi = theta.phi(lag)?;
                let w = solve_w(&phi, WLoss::Nuclear, &cfg.adam)?;
                let s = SymMatrix::symmetrize(&rearrange(&pad(&phi, &w)?)?)?;
                let eig = sym_eigen(&s)?;
                let clipped: Vec<f64> = eig.values.iter().map(|l| l.max(0.0)).collect();
                ks.push(ridge_select_k(&clipped, cfg.n, rows, cfg.p, &ridge_cfg)?);
            }
            ks
        }
    };

    let loss = match cfg.loss.as_str() {
        "nuclear" => WLoss::Nuclear,
        "top_eigen" => WLoss::TopEigen(1), // per-lag counts substituted below
        other => {
            return Err(BekkError::invalid(format!(
                "unknown loss {other:?}; expected \"nuclear\" or \"top_eigen\""
            )))
        }
    };
    let params = recover_bekk(&theta, &ks, loss, &cfg.adam, cfg.floor)?;
    write_json(
        &opts.out.join("params.json"),
        &RecoverJson {
            params: ParamsJson::from_params(&params),
            loss: cfg.loss.clone(),
            config: serde_json::to_value(&cfg).unwrap_or_default(),
        },
    )
}

// ---------------------------------------------------------------- backtest

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestCmdConfig {
    pub panel: PathBuf,
    #[serde(default)]
    pub backtest: BacktestConfig,
}

#[derive(Debug, Serialize)]
struct BacktestJson {
    report: crate::backtest::BacktestReport,
    returns_csv: String,
    config: serde_json::Value,
}

/// Runs the expanding-window backtest and writes `backtest_report.json` and
/// the realized return series as tidy CSV.
pub fn cmd_backtest(config_path: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg: BacktestCmdConfig = read_config(config_path)?;
    ensure_out(opts)?;
    let panel = load_panel(&cfg.panel, opts.center)?;
    let report = run_backtest(&panel, &cfg.backtest)?;
    let rows: Vec<Vec<String>> = report
        .returns
        .iter()
        .enumerate()
        .map(|(i, z)| vec![(report.t0 + i).to_string(), fmt_f64(*z)])
        .collect();
    write_tidy_csv(&opts.out.join("returns.csv"), &["origin", "return"], &rows)?;
    write_json(
        &opts.out.join("backtest_report.json"),
        &BacktestJson {
            report,
            returns_csv: "returns.csv".into(),
            config: serde_json::to_value(&cfg).unwrap_or_default(),
        },
    )
}

// ---------------------------------------------------------------------- mc

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub estimator: McEstimatorConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            dgp: DgpSpec::default(),
            t_grid: vec![500],
            reps: 1,
            estimator: McEstimatorConfig::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct McSummaryJson {
    t_grid: Vec<usize>,
    reps: usize,
    failed: usize,
    mean_theta_err_fro: Vec<(usize, f64)>,
    mean_theta_nt_err_fro: Vec<(usize, f64)>,
    p_hit_rate: Vec<(usize, f64)>,
    k_hit_rate: Vec<(usize, f64)>,
    mean_pd_proportion: Vec<(usize, f64)>,
    config: serde_json::Value,
}

fn mc_rows(records: &[McRecord]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in records {
        let mut push = |metric: &str, value: f64| {
            if value.is_finite() {
                rows.push(vec![
                    r.rep.to_string(),
                    r.t.to_string(),
                    metric.to_string(),
                    fmt_f64(value),
                ]);
            }
        };
        if let Some(err) = &r.error {
            rows.push(vec![r.rep.to_string(), r.t.to_string(), "failed".into(), "1".into()]);
            let _ = err;
            continue;
        }
        push("lambda", r.lambda);
        push("tau", r.tau);
        push("theta_err_fro", r.theta_err_fro);
        push("theta_err_2inf", r.theta_err_2inf);
        push("theta_nt_err_fro", r.theta_nt_err_fro);
        push("theta_nt_err_2inf", r.theta_nt_err_2inf);
        push("sigma_err_check", r.sigma_err_check);
        push("sigma_err_hat", r.sigma_err_hat);
        push("sigma_err_tilde", r.sigma_err_tilde);
        push("omega_err", r.omega_err);
        for (lag, comp, err) in &r.a_errs {
            push(&format!("a_err_lag{lag}_k{comp}"), *err);
        }
        if let Some(p_hat) = r.p_hat {
            push("p_hat", p_hat as f64);
        }
        if let Some(hit) = r.p_hit {
            push("p_hit", f64::from(u8::from(hit)));
        }
        for (i, k) in r.k_hat.iter().enumerate() {
            push(&format!("k_hat_lag{}", i + 1), *k as f64);
        }
        if let Some(hit) = r.k_hit {
            push("k_hit", f64::from(u8::from(hit)));
        }
        push("pd_proportion", r.pd_proportion);
    }
    rows
}

/// Runs the Monte Carlo grid and writes `mc.csv` (tidy long format) plus
/// `mc_summary.json`.
pub fn cmd_mc(config_path: &Path, opts: &CommonOpts) -> Result<()> {
    let mut cfg: McConfig = read_config(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.dgp.seed = seed;
    }
    ensure_out(opts)?;
    let result = run_mc(&cfg.dgp, &cfg.t_grid, cfg.reps, &cfg.estimator)?;
    write_tidy_csv(&opts.out.join("mc.csv"), &["rep", "t", "metric", "value"], &mc_rows(&result.records))?;

    let per_t = |f: &dyn Fn(&McRecord) -> f64| -> Vec<(usize, f64)> {
        cfg.t_grid.iter().map(|&t| (t, result.mean_metric(t, f))).collect()
    };
    let summary = McSummaryJson {
        t_grid: cfg.t_grid.clone(),
        reps: cfg.reps,
        failed: result.records.iter().filter(|r| r.error.is_some()).count(),
        mean_theta_err_fro: per_t(&|r| r.theta_err_fro),
        mean_theta_nt_err_fro: per_t(&|r| r.theta_nt_err_fro),
        p_hit_rate: cfg
            .t_grid
            .iter()
            .map(|&t| (t, result.hit_rate(t, |r| r.p_hit)))
            .collect(),
        k_hit_rate: cfg
            .t_grid
            .iter()
            .map(|&t| (t, result.hit_rate(t, |r| r.k_hit)))
            .collect(),
        mean_pd_proportion: per_t(&|r| r.pd_proportion),
        config: serde_json::to_value(&cfg).unwrap_or_default(),
    };
    write_json(&opts.out.join("mc_summary.json"), &summary)
}
