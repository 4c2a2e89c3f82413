//! End-to-end tests of the command-line interface: file formats, exit
//! codes, determinism across runs and thread counts.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bekk_bin() -> &'static str {
    env!("CARGO_BIN_EXE_bekk")
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new() -> Self {
        Run { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> std::process::Output {
        Command::new(bekk_bin()).args(args).current_dir(self.path()).output().unwrap()
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_smoke_produces_panel() {
    let run = Run::new();
    let cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 3, "p": 1, "s": 1, "k": [1] }, "t": 100, "burn_in": 50 }"#,
    );
    let out = run.run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", "o"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let panel = read(&run.path().join("o/panel.csv"));
    let rows: Vec<&str> = panel.lines().collect();
    assert_eq!(rows.len(), 100);
    assert_eq!(rows[0].split(',').count(), 3);
    assert!(run.path().join("o/params.json").exists());
    assert!(run.path().join("o/theta_true.csv").exists());
}

#[test]
fn simulate_identical_seeds_are_byte_identical() {
    let run = Run::new();
    let cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 2, "p": 1, "s": 1, "k": [1] }, "t": 60, "burn_in": 20 }"#,
    );
    for dir in ["a", "b"] {
        let out =
            run.run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", dir]);
        assert!(out.status.success());
    }
    assert_eq!(read(&run.path().join("a/panel.csv")), read(&run.path().join("b/panel.csv")));
}

#[test]
fn fit_reports_small_kkt_residual_and_accepts_inf_tau() {
    let run = Run::new();
    let sim_cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 3, "p": 1, "s": 2, "k": [1], "arch_diag": [0.3, 0.5] }, "t": 300, "burn_in": 100 }"#,
    );
    assert!(run.run(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--seed", "3"]).status.success());
    let fit_cfg = run.write(
        "fit.json",
        r#"{ "panel": "panel.csv", "p": 1, "lambda": 0.02, "tau": "inf",
             "fista": { "tol": 1e-10, "max_iter": 100000 } }"#,
    );
    let out = run.run(&["fit", "--config", fit_cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&read(&run.path().join("fit_report.json"))).unwrap();
    assert!(report["kkt_residual"].as_f64().unwrap() < 1e-4);
    assert_eq!(report["tau"], "inf");
}

#[test]
fn fit_huge_lambda_zeroes_every_coefficient() {
    let run = Run::new();
    let sim_cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 2, "p": 1, "s": 1, "k": [1] }, "t": 80, "burn_in": 20 }"#,
    );
    assert!(run.run(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--seed", "1"]).status.success());
    let fit_cfg = run.write(
        "fit.json",
        r#"{ "panel": "panel.csv", "p": 1, "lambda": 1e9, "tau": 1.0 }"#,
    );
    assert!(run.run(&["fit", "--config", fit_cfg.to_str().unwrap()]).status.success());
    let theta = read(&run.path().join("theta.csv"));
    for line in theta.lines() {
        for cell in line.split(',') {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn malformed_csv_reports_line_and_exits_3() {
    let run = Run::new();
    run.write("bad.csv", "0.1,0.2\n0.3,not_a_number\n");
    let fit_cfg = run.write(
        "fit.json",
        r#"{ "panel": "bad.csv", "p": 1, "lambda": 0.1, "tau": 1.0 }"#,
    );
    let out = run.run(&["fit", "--config", fit_cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");

    run.write("ragged.csv", "0.1,0.2\n0.3\n");
    let fit_cfg = run.write(
        "fit2.json",
        r#"{ "panel": "ragged.csv", "p": 1, "lambda": 0.1, "tau": 1.0 }"#,
    );
    let out = run.run(&["fit", "--config", fit_cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_typo_exits_2() {
    let run = Run::new();
    let cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 2, "p": 1, "s": 1, "k": [1] }, "t": 50, "burn_in": 10, "oops": true }"#,
    );
    let out = run.run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("oops"), "stderr: {stderr}");
}

#[test]
fn missing_config_exits_2() {
    let run = Run::new();
    let out = run.run(&["fit"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn backtest_equal_weight_constant_panel_reports_undefined_ir() {
    let run = Run::new();
    let rows: String = (0..40).map(|_| "0.015625,0.015625,0.015625\n").collect();
    run.write("flat.csv", &rows);
    let cfg = run.write(
        "bt.json",
        r#"{ "panel": "flat.csv", "backtest": { "kind": "equal_weight", "test_fraction": 0.25 } }"#,
    );
    let out = run.run(&["backtest", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&read(&run.path().join("backtest_report.json"))).unwrap();
    assert_eq!(report["report"]["sd"].as_f64().unwrap(), 0.0);
    assert!(report["report"]["ir"].is_null());
    let returns = read(&run.path().join("returns.csv"));
    assert!(returns.starts_with("origin,return"));
}

#[test]
fn mc_smoke_single_rep_emits_complete_csv() {
    let run = Run::new();
    let cfg = run.write(
        "mc.json",
        r#"{ "dgp": { "n": 3, "p": 1, "s": 1, "k": [1] }, "t_grid": [120], "reps": 1,
             "estimator": {
               "select": { "lambda_grid": [0.05], "tau_grid": ["inf"], "valid_len": 5, "p_max": 2 },
               "adam": { "iters": 50 },
               "burn_in": 20,
               "selection": true
             } }"#,
    );
    let out = run.run(&["mc", "--config", cfg.to_str().unwrap(), "--seed", "2"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&run.path().join("mc.csv"));
    assert!(csv.starts_with("rep,t,metric,value"));
    for metric in
        ["theta_err_fro", "sigma_err_tilde", "omega_err", "p_hat", "k_hat_lag1", "pd_proportion"]
    {
        assert!(csv.contains(metric), "missing metric {metric} in: {csv}");
    }
    assert!(run.path().join("mc_summary.json").exists());
}

#[test]
fn mc_byte_identical_across_runs_and_thread_counts() {
    let run = Run::new();
    let cfg = run.write(
        "mc.json",
        r#"{ "dgp": { "n": 2, "p": 1, "s": 1, "k": [1] }, "t_grid": [80, 120], "reps": 3,
             "estimator": {
               "select": { "lambda_grid": [0.1], "tau_grid": [1.0, "inf"], "valid_len": 5 },
               "adam": { "iters": 30 },
               "burn_in": 20,
               "sigma_errors": false,
               "bekk_errors": false
             } }"#,
    );
    for (dir, threads) in [("t1", "1"), ("t4", "4"), ("t1b", "1")] {
        let out = run.run(&[
            "mc", "--config", cfg.to_str().unwrap(), "--seed", "11", "--threads", threads, "--out", dir,
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = read(&run.path().join("t1/mc.csv"));
    let b = read(&run.path().join("t4/mc.csv"));
    let c = read(&run.path().join("t1b/mc.csv"));
    assert_eq!(a, b, "thread count changed the bytes");
    assert_eq!(a, c, "re-run changed the bytes");
}

#[test]
fn select_pipeline_on_simulated_panel() {
    let run = Run::new();
    let sim_cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 3, "p": 1, "s": 2, "k": [1], "arch_diag": [0.4, 0.6], "arch_offdiag": [-0.12, 0.12] },
             "t": 600, "burn_in": 200 }"#,
    );
    assert!(run.run(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--seed", "4"]).status.success());
    let sel_cfg = run.write(
        "select.json",
        r#"{ "panel": "panel.csv",
             "select": { "p_max": 2, "iota_d": 0.2, "valid_len": 10 },
             "adam": { "iters": 300 } }"#,
    );
    let out = run.run(&["select", "--config", sel_cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&read(&run.path().join("select_report.json"))).unwrap();
    let p = report["selected_p"].as_u64().unwrap();
    assert!(p >= 1 && p <= 2);
    assert!(report["params"]["omega"].is_array());
    assert!(run.path().join("theta.csv").exists());
}

#[test]
fn recover_round_trip_through_files() {
    let run = Run::new();
    // simulate, fit, then recover with known component counts
    let sim_cfg = run.write(
        "sim.json",
        r#"{ "dgp": { "n": 3, "p": 1, "s": 2, "k": [1], "arch_diag": [0.4, 0.6] }, "t": 500, "burn_in": 100 }"#,
    );
    assert!(run.run(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--seed", "8"]).status.success());
    let fit_cfg = run.write(
        "fit.json",
        r#"{ "panel": "panel.csv", "p": 1, "lambda": 0.05, "tau": "inf" }"#,
    );
    assert!(run.run(&["fit", "--config", fit_cfg.to_str().unwrap()]).status.success());
    let rec_cfg = run.write(
        "rec.json",
        r#"{ "theta": "theta.csv", "n": 3, "p": 1, "k": [1], "adam": { "iters": 400 } }"#,
    );
    let out = run.run(&["recover", "--config", rec_cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let params: serde_json::Value =
        serde_json::from_str(&read(&run.path().join("params.json"))).unwrap();
    assert_eq!(params["params"]["k"], serde_json::json!([1]));
    assert_eq!(params["params"]["a"][0].as_array().unwrap().len(), 1);
}
