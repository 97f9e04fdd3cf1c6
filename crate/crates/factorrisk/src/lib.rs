//! Command implementations behind the `factorrisk` binary.
//!
//! One directory is one experiment. Every command reads a data directory
//! plus an optional JSON config, writes its artifacts and a manifest
//! recording the full parameter set, and reports failures as a
//! machine-readable error value `{module, code, message, context}`.

pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use factor_risk::backtest::{run_backtest, BacktestConfig, BacktestError};
use factor_risk::covariance::estimate_factor_covariance;
use factor_risk::model::{
    build_snapshot, run_bias_evaluation, run_cross_sections, BiasRunConfig, ModelConfig, ModelError,
};
use factor_risk::panel::fmt_f64;
use factor_risk::qp::{
    solve_portfolio, ConstraintSet, Objective, PortfolioProblem, QpError, QpTolerances, WeightMode,
};
use factor_risk::store::{
    load_market_data, read_dated_matrix, universe_hash, write_covariance, write_delta,
    write_factor_returns, write_idio_returns, write_weights, Manifest, StoreError,
};
use factor_risk::synth::{write_synthetic, SyntheticMarketSpec};

/// Machine-readable command failure.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub module: String,
    pub code: String,
    pub message: String,
    pub context: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}/{}] {} ({})",
            self.module, self.code, self.message, self.context
        )
    }
}

impl CliError {
    fn new(module: &str, code: &str, message: impl ToString, context: impl ToString) -> Self {
        CliError {
            module: module.to_string(),
            code: code.to_string(),
            message: message.to_string(),
            context: context.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable error")
    }
}

pub type CliResult = Result<(), CliError>;

fn store_err(context: &str) -> impl Fn(StoreError) -> CliError + '_ {
    move |e| CliError::new("panel_store", e.code(), &e, context)
}

fn model_err(context: &str) -> impl Fn(ModelError) -> CliError + '_ {
    move |e| {
        let module = match &e {
            ModelError::Panel(_) => "panel_store",
            ModelError::Exposure(_) => "exposure_pipeline",
            ModelError::Regression(_) => "factor_regression",
            ModelError::Covariance(_) => "factor_covariance",
            ModelError::Idio(_) => "idio_variance",
            ModelError::Risk(_) => "risk_assembly",
            _ => "model",
        };
        CliError::new(module, e.code(), &e, context)
    }
}

fn qp_err(context: &str) -> impl Fn(QpError) -> CliError + '_ {
    move |e| CliError::new("qp_optimizer", e.code(), &e, context)
}

fn backtest_err(context: &str) -> impl Fn(BacktestError) -> CliError + '_ {
    move |e| {
        let module = match &e {
            BacktestError::Model(ModelError::Panel(_)) => "panel_store",
            BacktestError::Model(ModelError::Exposure(_)) => "exposure_pipeline",
            BacktestError::Model(ModelError::Regression(_)) => "factor_regression",
            BacktestError::Model(ModelError::Covariance(_)) => "factor_covariance",
            BacktestError::Model(ModelError::Idio(_)) => "idio_variance",
            BacktestError::Model(ModelError::Risk(_)) => "risk_assembly",
            _ => "backtester",
        };
        CliError::new(module, e.code(), &e, context)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("cli", "Io", e, path.display().to_string())
}

/// Flat run configuration; any subset of keys may appear in the JSON file,
/// and command-line flags override them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub bias: BiasRunConfig,
    pub synth: SyntheticMarketSpec,
    pub objective: Option<Objective>,
    pub weight_mode: Option<WeightMode>,
    pub lambda: f64,
    pub constraints: ConstraintSet,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub date: Option<NaiveDate>,
    pub risk_free_rate: f64,
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::new("cli", "BadConfig", e, p.display().to_string()))
        }
    }
}

fn ensure_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::new("cli", "Json", e, path.display().to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn cmd_synth(out: &Path, config: &RunConfig, seed: Option<u64>) -> CliResult {
    let mut spec = config.synth.clone();
    if let Some(s) = seed {
        spec.seed = s;
    }
    ensure_dir(out)?;
    write_synthetic(out, &spec).map_err(store_err("synth"))
}

#[derive(Serialize)]
struct IngestReport {
    n_dates: usize,
    n_stocks: usize,
    n_valid_returns: usize,
    n_exposure_dates: usize,
    universe_hash: String,
    last_date_universe: usize,
    last_date_dropped: Vec<(String, Vec<String>)>,
}

pub fn cmd_ingest(data: &Path, out: Option<&Path>) -> CliResult {
    let market = load_market_data(data).map_err(store_err("ingest"))?;
    let last = *market.data_last_date();
    let tensor = market.exposures.get(&last);
    let caps = market.caps.get(&last);
    let (universe, dropped) = match (tensor, caps) {
        (Some(t), Some(c)) => {
            let valid_idx = market
                .returns
                .date_index(last)
                .map(|ti| {
                    market
                        .returns
                        .stocks()
                        .iter()
                        .enumerate()
                        .filter(|(n, _)| market.returns.is_valid(ti, *n))
                        .map(|(_, s)| s.clone())
                        .collect::<Vec<_>>()
                })
                .unwrap_or_default();
            let alignment = factor_risk::panel::align_universe(
                &[
                    ("returns", valid_idx),
                    ("exposures", t.stocks().to_vec()),
                    ("caps", c.stocks().cloned().collect()),
                ],
                market.returns.stocks(),
            )
            .map_err(|e| CliError::new("panel_store", e.code(), &e, "ingest"))?;
            (
                alignment.universe.len(),
                alignment
                    .dropped
                    .into_iter()
                    .map(|(n, v)| (n, v.into_iter().map(|s| s.to_string()).collect()))
                    .collect(),
            )
        }
        _ => (0, Vec::new()),
    };
    let report = IngestReport {
        n_dates: market.returns.dates().len(),
        n_stocks: market.returns.stocks().len(),
        n_valid_returns: market.returns.n_valid(),
        n_exposure_dates: market.exposures.len(),
        universe_hash: universe_hash(market.returns.stocks()),
        last_date_universe: universe,
        last_date_dropped: dropped,
    };
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_json(&dir.join("ingest_report.json"), &report)?;
            Manifest::new("ingest", serde_json::json!({}))
                .with_universe(market.returns.stocks())
                .write(&dir.join("manifest.json"))
                .map_err(store_err("ingest"))
        }
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serializable")
            );
            Ok(())
        }
    }
}

trait MarketDataExt {
    fn data_last_date(&self) -> &NaiveDate;
}

impl MarketDataExt for factor_risk::store::MarketData {
    fn data_last_date(&self) -> &NaiveDate {
        self.returns.dates().last().expect("validated non-empty")
    }
}

pub fn cmd_exposures(data: &Path, config: &RunConfig, out: &Path) -> CliResult {
    let market = load_market_data(data).map_err(store_err("exposures"))?;
    let outputs = run_cross_sections(&market, &config.model).map_err(model_err("exposures"))?;
    ensure_dir(&out.join("exposures"))?;
    for (date, tensor) in &outputs.processed {
        tensor
            .write(&out.join("exposures").join(format!("{date}.csv")))
            .map_err(|e| CliError::new("panel_store", e.code(), &e, "exposures"))?;
    }
    let mut manifest = Manifest::new(
        "exposures",
        serde_json::json!({
            "mad_multiplier": config.model.pipeline.mad_multiplier,
            "ortho_plan": config.model.pipeline.ortho_plan,
            "std_weighting": config.model.pipeline.std_weighting,
        }),
    )
    .with_universe(market.returns.stocks());
    for (date, w) in outputs.pipeline_warnings.iter().take(200) {
        manifest.notes.push(format!("{date}: {w:?}"));
    }
    for (date, reason) in &outputs.skipped_dates {
        manifest.notes.push(format!("skipped {date}: {reason}"));
    }
    manifest
        .write(&out.join("manifest.json"))
        .map_err(store_err("exposures"))
}

pub fn cmd_regress(data: &Path, config: &RunConfig, out: &Path) -> CliResult {
    let market = load_market_data(data).map_err(store_err("regress"))?;
    let outputs = run_cross_sections(&market, &config.model).map_err(model_err("regress"))?;
    ensure_dir(out)?;
    write_factor_returns(&out.join("factor_returns.csv"), &outputs.factor_returns)
        .map_err(store_err("regress"))?;
    write_idio_returns(&out.join("idio_returns.csv"), &outputs.idio_returns)
        .map_err(store_err("regress"))?;
    let mut r2 = String::from("date,r2\n");
    for (d, v) in outputs
        .factor_returns
        .dates()
        .iter()
        .zip(outputs.factor_returns.r2())
    {
        r2.push_str(&format!("{d},{}\n", fmt_f64(*v)));
    }
    fs::write(out.join("r2.csv"), r2).map_err(io_err(out))?;
    let mut manifest = Manifest::new(
        "regress",
        serde_json::json!({ "weighting": config.model.weighting }),
    )
    .with_universe(market.returns.stocks());
    for (date, inds) in &outputs.dropped_industries {
        manifest
            .notes
            .push(format!("dropped industries {date}: {}", inds.join("+")));
    }
    for (date, reason) in &outputs.skipped_dates {
        manifest.notes.push(format!("skipped {date}: {reason}"));
    }
    manifest
        .write(&out.join("manifest.json"))
        .map_err(store_err("regress"))
}

/// Estimation date: explicit flag/config, else the last trading date.
fn resolve_date(config: &RunConfig, flag: Option<NaiveDate>, last: NaiveDate) -> NaiveDate {
    flag.or(config.date).unwrap_or(last)
}

pub fn cmd_cov(
    data: &Path,
    from: Option<&Path>,
    config: &RunConfig,
    out: &Path,
    date: Option<NaiveDate>,
) -> CliResult {
    ensure_dir(out)?;
    let ewma = &config.model.ewma;
    let est = match from {
        Some(regress_out) => {
            // Reuse persisted factor returns.
            let path = regress_out.join("factor_returns.csv");
            let (dates, factors, values) = read_dated_matrix(&path).map_err(store_err("cov"))?;
            let target = date.or(config.date).unwrap_or(*dates.last().ok_or_else(|| {
                CliError::new("factor_covariance", "EmptySeries", "no dates", "cov")
            })?);
            let end = dates.iter().rposition(|d| *d <= target).ok_or_else(|| {
                CliError::new(
                    "factor_covariance",
                    "InsufficientData",
                    "date before series",
                    "cov",
                )
            })?;
            let start = (end + 1).saturating_sub(ewma.window + 1);
            let window = values.slice(ndarray::s![start..=end, ..]);
            estimate_factor_covariance(window, &factors, target, ewma)
                .map_err(|e| CliError::new("factor_covariance", e.code(), &e, "cov"))?
        }
        None => {
            let market = load_market_data(data).map_err(store_err("cov"))?;
            let outputs = run_cross_sections(&market, &config.model).map_err(model_err("cov"))?;
            let last = *market.data_last_date();
            let target = resolve_date(config, date, last);
            let series = &outputs.factor_returns;
            let end = series
                .dates()
                .iter()
                .rposition(|d| *d <= target)
                .ok_or_else(|| {
                    CliError::new(
                        "factor_covariance",
                        "InsufficientData",
                        "date before series",
                        "cov",
                    )
                })?;
            let window = series.window(end, ewma.window + 1);
            estimate_factor_covariance(window, series.factors(), target, ewma)
                .map_err(|e| CliError::new("factor_covariance", e.code(), &e, "cov"))?
        }
    };
    write_covariance(&out.join("fnw.csv"), &est).map_err(store_err("cov"))?;
    Manifest::new(
        "cov",
        serde_json::json!({
            "h": ewma.window,
            "tau": ewma.half_life,
            "nw_lags": ewma.nw_lags,
            "monthly_scale": ewma.monthly_scale,
            "demean_lags": ewma.demean_lags,
            "stage": est.stage,
            "date": est.date,
            "cov_model": config.model.cov_model,
        }),
    )
    .write(&out.join("manifest.json"))
    .map_err(store_err("cov"))
}

pub fn cmd_idio(data: &Path, config: &RunConfig, out: &Path, date: Option<NaiveDate>) -> CliResult {
    let market = load_market_data(data).map_err(store_err("idio"))?;
    let outputs = run_cross_sections(&market, &config.model).map_err(model_err("idio"))?;
    let target = resolve_date(config, date, *market.data_last_date());
    // Reuse the snapshot builder for window selection, then persist Δ.
    let snapshot = build_snapshot(&outputs, &config.model, target).map_err(model_err("idio"))?;
    ensure_dir(out)?;
    write_delta(&out.join("delta.csv"), &snapshot.idio).map_err(store_err("idio"))?;
    Manifest::new(
        "idio",
        serde_json::json!({
            "h": config.model.idio.window,
            "tau": config.model.idio.half_life,
            "nw_lags": config.model.idio.nw_lags,
            "monthly_scale": config.model.idio.monthly_scale,
            "e0": config.model.idio.e0,
            "variance_floor_frac": config.model.idio.variance_floor_frac,
            "mode": config.model.idio_mode,
            "date": snapshot.date,
        }),
    )
    .with_universe(snapshot.universe())
    .write(&out.join("manifest.json"))
    .map_err(store_err("idio"))
}

pub fn cmd_snapshot(
    data: &Path,
    config: &RunConfig,
    out: &Path,
    date: Option<NaiveDate>,
) -> CliResult {
    let market = load_market_data(data).map_err(store_err("snapshot"))?;
    let outputs = run_cross_sections(&market, &config.model).map_err(model_err("snapshot"))?;
    let target = resolve_date(config, date, *market.data_last_date());
    let snapshot =
        build_snapshot(&outputs, &config.model, target).map_err(model_err("snapshot"))?;
    ensure_dir(out)?;
    snapshot
        .exposures
        .write(&out.join("exposures.csv"))
        .map_err(|e| CliError::new("panel_store", e.code(), &e, "snapshot"))?;
    write_covariance(&out.join("fnw.csv"), &snapshot.factor_cov).map_err(store_err("snapshot"))?;
    write_delta(&out.join("delta.csv"), &snapshot.idio).map_err(store_err("snapshot"))?;
    Manifest::new(
        "snapshot",
        serde_json::json!({
            "date": snapshot.date,
            "n_stocks": snapshot.n_stocks(),
            "n_factors": snapshot.n_factors(),
            "model": config.model,
        }),
    )
    .with_universe(snapshot.universe())
    .write(&out.join("manifest.json"))
    .map_err(store_err("snapshot"))
}

#[derive(Serialize)]
struct BiasSeries {
    groups: Vec<usize>,
    mean_bias: Vec<f64>,
    n_obs: Vec<usize>,
    windows: usize,
    horizon: usize,
    mean_abs_deviation: f64,
}

pub fn cmd_bias(data: &Path, config: &RunConfig, out: &Path) -> CliResult {
    let market = load_market_data(data).map_err(store_err("bias"))?;
    let outputs = run_cross_sections(&market, &config.model).map_err(model_err("bias"))?;
    let eval = run_bias_evaluation(&market, &outputs, &config.model, &config.bias)
        .map_err(model_err("bias"))?;
    ensure_dir(out)?;
    let mut csv = String::from("group,mean_bias,n_obs\n");
    for g in &eval.report.groups {
        csv.push_str(&format!(
            "{},{},{}\n",
            g.group,
            fmt_f64(g.mean_bias),
            g.n_obs
        ));
    }
    fs::write(out.join("bias.csv"), csv).map_err(io_err(out))?;
    let series = BiasSeries {
        groups: eval.report.groups.iter().map(|g| g.group).collect(),
        mean_bias: eval.report.groups.iter().map(|g| g.mean_bias).collect(),
        n_obs: eval.report.groups.iter().map(|g| g.n_obs).collect(),
        windows: eval.report.windows,
        horizon: eval.report.horizon,
        mean_abs_deviation: eval.report.mean_abs_deviation(),
    };
    write_json(&out.join("bias_series.json"), &series)?;
    Manifest::new(
        "bias",
        serde_json::json!({
            "windows": config.bias.windows,
            "horizon": config.bias.horizon,
            "groups": config.bias.groups,
            "overlapping_windows": false,
            "cov_model": config.model.cov_model,
            "idio_mode": config.model.idio_mode,
        }),
    )
    .with_universe(market.returns.stocks())
    .write(&out.join("manifest.json"))
    .map_err(store_err("bias"))
}

#[derive(Serialize)]
struct OptimizeDiagnostics {
    status: factor_risk::qp::SolveStatus,
    objective_value: f64,
    predicted_risk: f64,
    predicted_alpha: f64,
    kkt_residual: f64,
    iterations: usize,
    active_constraints: Vec<String>,
    tolerances: QpTolerances,
    date: NaiveDate,
}

pub fn cmd_optimize(
    data: &Path,
    config: &RunConfig,
    out: &Path,
    date: Option<NaiveDate>,
    lambda: Option<f64>,
) -> CliResult {
    let market = load_market_data(data).map_err(store_err("optimize"))?;
    let outputs = run_cross_sections(&market, &config.model).map_err(model_err("optimize"))?;
    let target = resolve_date(config, date, *market.data_last_date());
    let snapshot =
        build_snapshot(&outputs, &config.model, target).map_err(model_err("optimize"))?;

    let objective = config.objective.unwrap_or(Objective::MinRisk);
    let weight_mode = config.weight_mode.unwrap_or(WeightMode::Absolute);
    let lambda = lambda.unwrap_or(config.lambda);

    let benchmark = market.benchmark.as_ref().map(|b| {
        snapshot
            .universe()
            .iter()
            .map(|s| b.get(s).unwrap_or(0.0))
            .collect::<Vec<f64>>()
    });
    let benchmark = benchmark.map(|mut v| {
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            for w in v.iter_mut() {
                *w /= s;
            }
        }
        v
    });
    let alpha = market.alpha.as_ref().map(|a| {
        snapshot
            .universe()
            .iter()
            .map(|s| a.get(s).unwrap_or(0.0))
            .collect::<Vec<f64>>()
    });

    let problem = PortfolioProblem {
        objective,
        weight_mode,
        snapshot: &snapshot,
        alpha,
        lambda,
        benchmark,
        constraints: config.constraints.clone(),
    };
    let tol = QpTolerances::default();
    let sol = solve_portfolio(&problem, &tol).map_err(qp_err("optimize"))?;

    ensure_dir(out)?;
    write_weights(&out.join("weights.csv"), snapshot.universe(), &sol.weights)
        .map_err(store_err("optimize"))?;
    write_json(
        &out.join("diagnostics.json"),
        &OptimizeDiagnostics {
            status: sol.status,
            objective_value: sol.objective_value,
            predicted_risk: sol.predicted_risk,
            predicted_alpha: sol.predicted_alpha,
            kkt_residual: sol.kkt_residual,
            iterations: sol.iterations,
            active_constraints: sol.active_constraints,
            tolerances: tol,
            date: snapshot.date,
        },
    )?;
    Manifest::new(
        "optimize",
        serde_json::json!({
            "objective": objective,
            "weight_mode": weight_mode,
            "lambda": lambda,
            "constraints": config.constraints,
            "tolerances": tol,
            "model": config.model,
            "date": snapshot.date,
        }),
    )
    .with_universe(snapshot.universe())
    .write(&out.join("manifest.json"))
    .map_err(store_err("optimize"))
}

pub fn cmd_backtest(data: &Path, config: &RunConfig, out: &Path) -> CliResult {
    let market = load_market_data(data).map_err(store_err("backtest"))?;
    let dates = market.returns.dates();
    let warm = config.model.ewma.window + 1;
    let default_start = dates
        .get(warm)
        .copied()
        .unwrap_or(*dates.last().expect("non-empty"));
    let bt = BacktestConfig {
        start: config.start.unwrap_or(default_start),
        end: config.end.unwrap_or(*market.data_last_date()),
        objective: config.objective.unwrap_or(Objective::MinRisk),
        weight_mode: config.weight_mode.unwrap_or(WeightMode::Absolute),
        lambda: config.lambda,
        constraints: config.constraints.clone(),
        model: config.model.clone(),
        risk_free_rate: config.risk_free_rate,
    };
    let report = run_backtest(&market, &bt).map_err(backtest_err("backtest"))?;

    ensure_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    let mut nv = String::from("date,portfolio,benchmark,excess\n");
    for k in 0..report.dates.len() {
        nv.push_str(&format!(
            "{},{},{},{}\n",
            report.dates[k],
            fmt_f64(report.portfolio_nv[k]),
            fmt_f64(report.benchmark_nv[k]),
            fmt_f64(report.excess_nv[k]),
        ));
    }
    fs::write(out.join("netvalue.csv"), nv).map_err(io_err(out))?;
    Manifest::new(
        "backtest",
        serde_json::to_value(&bt).expect("serializable config"),
    )
    .with_universe(market.returns.stocks())
    .with_dates(report.dates[0], *report.dates.last().expect("non-empty"))
    .write(&out.join("manifest.json"))
    .map_err(store_err("backtest"))
}

pub fn cmd_plot(data: &Path, out: &Path) -> CliResult {
    ensure_dir(out)?;
    let mut plotted = false;

    let nv_path = data.join("netvalue.csv");
    if nv_path.exists() {
        let text = fs::read_to_string(&nv_path).map_err(io_err(&nv_path))?;
        let mut portfolio = Vec::new();
        let mut benchmark = Vec::new();
        let mut excess = Vec::new();
        for line in text.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() == 4 {
                portfolio.push(cells[1].parse::<f64>().unwrap_or(f64::NAN));
                benchmark.push(cells[2].parse::<f64>().unwrap_or(f64::NAN));
                excess.push(cells[3].parse::<f64>().unwrap_or(f64::NAN));
            }
        }
        plot::line_chart(
            &out.join("netvalue.svg"),
            "Net value",
            ("trading day", "net value"),
            &[
                ("portfolio", &portfolio),
                ("benchmark", &benchmark),
                ("excess", &excess),
            ],
        )
        .map_err(io_err(out))?;

        let mut peak = 1.0f64;
        let drawdown: Vec<f64> = portfolio
            .iter()
            .map(|v| {
                peak = peak.max(*v);
                1.0 - v / peak
            })
            .collect();
        plot::line_chart(
            &out.join("drawdown.svg"),
            "Drawdown",
            ("trading day", "drawdown"),
            &[("portfolio", &drawdown)],
        )
        .map_err(io_err(out))?;
        plotted = true;
    }

    let bias_path = data.join("bias.csv");
    if bias_path.exists() {
        let text = fs::read_to_string(&bias_path).map_err(io_err(&bias_path))?;
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for line in text.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() == 3 {
                labels.push(format!("D{}", cells[0]));
                values.push(cells[1].parse::<f64>().unwrap_or(f64::NAN));
            }
        }
        plot::bar_chart(
            &out.join("bias_deciles.svg"),
            "Bias statistic by forecast-volatility decile",
            &labels,
            &values,
            Some(1.0),
        )
        .map_err(io_err(out))?;
        plotted = true;
    }

    if !plotted {
        return Err(CliError::new(
            "cli",
            "NothingToPlot",
            "no netvalue.csv or bias.csv found",
            data.display().to_string(),
        ));
    }
    Ok(())
}

/// Directory comparison helper used by determinism checks: byte equality of
/// every file under two roots.
pub fn dirs_identical(a: &Path, b: &Path) -> std::io::Result<bool> {
    fn walk(root: &Path, base: &Path, files: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in fs::read_dir(root)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(&p, base, files)?;
            } else {
                files.push(p.strip_prefix(base).expect("under base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut fa = Vec::new();
    let mut fb = Vec::new();
    walk(a, a, &mut fa)?;
    walk(b, b, &mut fb)?;
    fa.sort();
    fb.sort();
    if fa != fb {
        return Ok(false);
    }
    for rel in &fa {
        if fs::read(a.join(rel))? != fs::read(b.join(rel))? {
            return Ok(false);
        }
    }
    Ok(true)
}
