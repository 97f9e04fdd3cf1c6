//! Black-box tests of the `factorrisk` binary: subcommand chains, config
//! precedence, and the error JSON contract.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_factorrisk")
}

fn run_ok(args: &[&str]) {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("spawn factorrisk");
    assert!(
        out.status.success(),
        "factorrisk {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth_small(dir: &Path, config: &Path) {
    std::fs::write(
        config,
        r#"{
  "synth": { "n_stocks": 40, "n_days": 200, "seed": 5 },
  "model": {
    "ewma": { "window": 100, "half_life": 45.0 },
    "idio": { "window": 100, "half_life": 45.0 }
  },
  "bias": { "windows": 3 }
}"#,
    )
    .unwrap();
    run_ok(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
}

#[test]
fn full_subcommand_chain_produces_artifacts() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    let config = root.path().join("config.json");
    synth_small(&data, &config);
    let d = data.to_str().unwrap();
    let c = config.to_str().unwrap();

    run_ok(&["ingest", "--data", d, "--out", &format!("{d}/ingest")]);
    run_ok(&[
        "exposures",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/expo"),
    ]);
    run_ok(&[
        "regress",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/regress"),
    ]);
    run_ok(&[
        "cov",
        "--data",
        d,
        "--from",
        &format!("{d}/regress"),
        "--config",
        c,
        "--out",
        &format!("{d}/cov"),
    ]);
    run_ok(&[
        "idio",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/idio"),
    ]);
    run_ok(&[
        "snapshot",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/snap"),
    ]);
    run_ok(&[
        "bias",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/bias"),
    ]);
    run_ok(&[
        "optimize",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/opt"),
    ]);
    run_ok(&[
        "backtest",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/bt"),
    ]);
    run_ok(&[
        "plot",
        "--data",
        &format!("{d}/bt"),
        "--out",
        &format!("{d}/plots"),
    ]);
    run_ok(&[
        "plot",
        "--data",
        &format!("{d}/bias"),
        "--out",
        &format!("{d}/plots"),
    ]);

    for artifact in [
        "ingest/ingest_report.json",
        "expo/manifest.json",
        "regress/factor_returns.csv",
        "regress/idio_returns.csv",
        "regress/r2.csv",
        "cov/fnw.csv",
        "idio/delta.csv",
        "snap/exposures.csv",
        "snap/fnw.csv",
        "snap/delta.csv",
        "bias/bias.csv",
        "bias/bias_series.json",
        "opt/weights.csv",
        "opt/diagnostics.json",
        "bt/report.json",
        "bt/netvalue.csv",
        "plots/netvalue.svg",
        "plots/drawdown.svg",
        "plots/bias_deciles.svg",
    ] {
        assert!(data.join(artifact).exists(), "missing artifact {artifact}");
    }

    // Every output directory carries a manifest.
    for dir in [
        "expo", "regress", "cov", "idio", "snap", "bias", "opt", "bt",
    ] {
        assert!(
            data.join(dir).join("manifest.json").exists(),
            "missing manifest in {dir}"
        );
    }

    // delta.csv carries the documented diagnostic columns.
    let delta = std::fs::read_to_string(data.join("idio/delta.csv")).unwrap();
    assert!(delta.starts_with("stock,variance,gamma,h_n,Z_n,sigma_ts,sigma_str\n"));

    // weights respect the long-only budget by direct substitution.
    let weights = std::fs::read_to_string(data.join("opt/weights.csv")).unwrap();
    let mut total = 0.0f64;
    for line in weights.lines().skip(1) {
        let w: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(w >= -1e-8);
        total += w;
    }
    assert!((total - 1.0).abs() < 1e-8);
}

#[test]
fn failures_emit_error_json_and_nonzero_exit() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("nope");
    let out = Command::new(bin())
        .args(["regress", "--data", missing.to_str().unwrap(), "--out", "x"])
        .output()
        .expect("spawn factorrisk");
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).expect("error JSON");
    for key in ["module", "code", "message", "context"] {
        assert!(err.get(key).is_some(), "error JSON missing {key}: {stderr}");
    }
    assert_eq!(err["module"], "panel_store");
    assert_eq!(err["code"], "MissingInput");
}

#[test]
fn infeasible_problem_reports_qp_module() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    let config = root.path().join("config.json");
    synth_small(&data, &config);
    // A 1% cap on 40 stocks cannot meet the budget.
    let bad = root.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{
  "model": {
    "ewma": { "window": 100, "half_life": 45.0 },
    "idio": { "window": 100, "half_life": 45.0 }
  },
  "constraints": { "per_stock_cap": 0.01 }
}"#,
    )
    .unwrap();
    let out = Command::new(bin())
        .args([
            "optimize",
            "--data",
            data.to_str().unwrap(),
            "--config",
            bad.to_str().unwrap(),
            "--out",
            root.path().join("opt").to_str().unwrap(),
        ])
        .output()
        .expect("spawn factorrisk");
    assert!(!out.status.success());
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).expect("error JSON");
    assert_eq!(err["module"], "qp_optimizer");
    assert_eq!(err["code"], "Infeasible");
}

#[test]
fn lambda_flag_overrides_config() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    let config = root.path().join("config.json");
    synth_small(&data, &config);
    let opt_cfg = root.path().join("opt.json");
    std::fs::write(
        &opt_cfg,
        r#"{
  "model": {
    "ewma": { "window": 100, "half_life": 45.0 },
    "idio": { "window": 100, "half_life": 45.0 }
  },
  "objective": "max_risk_adjusted",
  "lambda": 1.0,
  "constraints": { "per_stock_cap": 0.2 }
}"#,
    )
    .unwrap();
    let d = data.to_str().unwrap();
    let c = opt_cfg.to_str().unwrap();
    run_ok(&[
        "optimize",
        "--data",
        d,
        "--config",
        c,
        "--out",
        &format!("{d}/opt_a"),
    ]);
    run_ok(&[
        "optimize",
        "--data",
        d,
        "--config",
        c,
        "--lambda",
        "25.0",
        "--out",
        &format!("{d}/opt_b"),
    ]);
    let read = |p: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(data.join(p)).unwrap()).unwrap()
    };
    let a = read("opt_a/diagnostics.json");
    let b = read("opt_b/diagnostics.json");
    // Heavier risk aversion can only reduce predicted risk.
    assert!(b["predicted_risk"].as_f64().unwrap() <= a["predicted_risk"].as_f64().unwrap() + 1e-12);
    let ma = read("opt_a/manifest.json");
    assert_eq!(ma["params"]["lambda"], 1.0);
    let mb = read("opt_b/manifest.json");
    assert_eq!(mb["params"]["lambda"], 25.0);
}
