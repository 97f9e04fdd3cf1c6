//! End-to-end model estimation over raw market data: per-date exposure
//! processing and cross-sectional regression, then snapshot assembly
//! (factor covariance + idiosyncratic variances) at any estimation date,
//! and rolling bias-statistic evaluation.
//!
//! Cross-sections depend only on their own date, so they are computed once
//! over the whole sample and every snapshot reuses the trailing slice it
//! needs. A snapshot for date t is estimated from data strictly before t.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use thiserror::Error;

use crate::covariance::{
    estimate_factor_covariance, estimate_raw_monthly, CovarianceError, EwmaConfig,
};
use crate::exposure::{run_pipeline, ExposureError, PipelineConfig, PipelineWarning};
use crate::idio::{estimate_idio_variances, IdioConfig, IdioError, IdioMode, IdioVarianceVector};
use crate::panel::{align_universe, ExposureTensor, PanelError, StockId};
use crate::regression::{
    assemble_series, run_cross_section, CrossSection, FactorReturnSeries, IdioReturnPanel,
    RegressionError, RegressionWeighting,
};
use crate::risk::{decile_bias, BiasReport, BiasWindow, RiskError, RiskModelSnapshot};
use crate::store::MarketData;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Exposure(#[from] ExposureError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Idio(#[from] IdioError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("no exposure tensor available at or before {date}")]
    NoExposures { date: NaiveDate },
    #[error("no market caps available for {date}")]
    NoCaps { date: NaiveDate },
    #[error("insufficient history: need {required} dates before {date}, have {actual}")]
    InsufficientHistory {
        date: NaiveDate,
        required: usize,
        actual: usize,
    },
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Panel(e) => e.code(),
            ModelError::Exposure(e) => e.code(),
            ModelError::Regression(e) => e.code(),
            ModelError::Covariance(e) => e.code(),
            ModelError::Idio(e) => e.code(),
            ModelError::Risk(e) => e.code(),
            ModelError::NoExposures { .. } => "NoExposures",
            ModelError::NoCaps { .. } => "NoCaps",
            ModelError::InsufficientHistory { .. } => "InsufficientHistory",
        }
    }
}

/// Model-variant switches used for comparisons in bias reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovModel {
    /// EWMA scaled to monthly, no serial-correlation adjustment.
    RawEwma,
    /// Full adjustment chain.
    NeweyWest,
}

/// Estimation parameters shared by snapshots, bias runs, and backtests.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub pipeline: PipelineConfig,
    pub weighting: RegressionWeighting,
    pub ewma: EwmaConfig,
    pub idio: IdioConfig,
    pub cov_model: CovModel,
    pub idio_mode: IdioMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            pipeline: PipelineConfig::default(),
            weighting: RegressionWeighting::SqrtCap,
            ewma: EwmaConfig::default(),
            idio: IdioConfig::default(),
            cov_model: CovModel::NeweyWest,
            idio_mode: IdioMode::Structural,
        }
    }
}

/// Everything the per-date stage produces.
pub struct EstimationOutputs {
    pub factor_returns: FactorReturnSeries,
    pub idio_returns: IdioReturnPanel,
    /// Processed tensors restricted to each date's regression universe.
    pub processed: BTreeMap<NaiveDate, ExposureTensor>,
    /// Regression-universe caps aligned with each processed tensor.
    pub universe_caps: BTreeMap<NaiveDate, Vec<f64>>,
    pub pipeline_warnings: Vec<(NaiveDate, PipelineWarning)>,
    pub dropped_industries: Vec<(NaiveDate, Vec<String>)>,
    /// Dates whose cross-section could not be estimated (degenerate universe,
    /// rank problems); their factor returns stay missing.
    pub skipped_dates: Vec<(NaiveDate, String)>,
}

/// Run exposure processing and the cross-sectional regression for every
/// date that has returns, exposures, and caps. Dates that cannot be
/// estimated are skipped and reported, not fatal; the run fails only when
/// no date survives.
pub fn run_cross_sections(
    data: &MarketData,
    config: &ModelConfig,
) -> Result<EstimationOutputs, ModelError> {
    let (factors, kinds) = {
        let (f, k) = data.factors();
        (f.to_vec(), k.to_vec())
    };
    let mut sections: Vec<CrossSection> = Vec::new();
    let mut processed = BTreeMap::new();
    let mut universe_caps = BTreeMap::new();
    let mut pipeline_warnings = Vec::new();
    let mut dropped_industries = Vec::new();
    let mut skipped_dates: Vec<(NaiveDate, String)> = Vec::new();

    for (t, &date) in data.returns.dates().iter().enumerate() {
        let (Some(tensor), Some(caps)) = (data.exposures.get(&date), data.caps.get(&date)) else {
            skipped_dates.push((date, "missing exposures or caps".to_string()));
            continue;
        };
        // Universe: stocks with a valid return today, exposures, and caps.
        let ret_stocks: Vec<StockId> = data
            .returns
            .stocks()
            .iter()
            .enumerate()
            .filter(|(n, _)| data.returns.is_valid(t, *n))
            .map(|(_, s)| s.clone())
            .collect();
        if ret_stocks.is_empty() {
            skipped_dates.push((date, "no valid returns".to_string()));
            continue;
        }
        let alignment = match align_universe(
            &[
                ("returns", ret_stocks),
                ("exposures", tensor.stocks().to_vec()),
                ("caps", caps.stocks().cloned().collect()),
            ],
            data.returns.stocks(),
        ) {
            Ok(a) => a,
            Err(e) => {
                skipped_dates.push((date, e.to_string()));
                continue;
            }
        };

        let rows: Vec<usize> = alignment
            .universe
            .iter()
            .map(|s| {
                tensor
                    .stocks()
                    .iter()
                    .position(|x| x == s)
                    .expect("aligned")
            })
            .collect();
        let sub_tensor = tensor.select_stocks(&rows);
        let cap_vec: Vec<f64> = alignment
            .universe
            .iter()
            .map(|s| caps.get(s).expect("aligned"))
            .collect();

        let out = match run_pipeline(&sub_tensor, &cap_vec, &config.pipeline) {
            Ok(o) => o,
            Err(e) => {
                skipped_dates.push((date, e.to_string()));
                continue;
            }
        };
        for w in &out.warnings {
            pipeline_warnings.push((date, w.clone()));
        }

        let returns_vec: Vec<f64> = alignment
            .universe
            .iter()
            .map(|s| {
                let n = data.returns.stock_index(s).expect("aligned");
                data.returns.value(t, n)
            })
            .collect();

        let cs = match run_cross_section(&out.tensor, &returns_vec, &cap_vec, config.weighting) {
            Ok(cs) => cs,
            Err(e) => {
                skipped_dates.push((date, e.to_string()));
                continue;
            }
        };
        if !cs.dropped_industries.is_empty() {
            dropped_industries.push((date, cs.dropped_industries.clone()));
        }
        sections.push(cs);
        processed.insert(date, out.tensor);
        universe_caps.insert(date, cap_vec);
    }

    if sections.is_empty() {
        // Surface the first recorded reason; there is nothing to estimate.
        let reason = skipped_dates
            .first()
            .map(|(d, r)| format!("{d}: {r}"))
            .unwrap_or_else(|| "no dates with complete inputs".to_string());
        return Err(ModelError::Panel(crate::panel::PanelError::InvalidValue {
            path: "<cross-sections>".to_string(),
            detail: format!("no estimable cross-sections ({reason})"),
        }));
    }

    let (factor_returns, idio_returns) =
        assemble_series(&sections, &factors, &kinds, data.returns.stocks());
    Ok(EstimationOutputs {
        factor_returns,
        idio_returns,
        processed,
        universe_caps,
        pipeline_warnings,
        dropped_industries,
        skipped_dates,
    })
}

/// Assemble the risk-model snapshot for `date`, estimated from the trailing
/// window of cross-sections strictly before it.
///
/// `date` does not have to be a trading date; the snapshot uses the latest
/// processed tensor before it and the factor-return window ending there.
pub fn build_snapshot(
    outputs: &EstimationOutputs,
    config: &ModelConfig,
    date: NaiveDate,
) -> Result<RiskModelSnapshot, ModelError> {
    let series_dates = outputs.factor_returns.dates();
    // End of the estimation window: last cross-section date strictly before.
    let end_idx = match series_dates.binary_search(&date) {
        Ok(i) | Err(i) => {
            if i == 0 {
                return Err(ModelError::InsufficientHistory {
                    date,
                    required: config.ewma.window + 1,
                    actual: 0,
                });
            }
            i - 1
        }
    };
    if end_idx + 1 < config.ewma.window + 1 {
        return Err(ModelError::InsufficientHistory {
            date,
            required: config.ewma.window + 1,
            actual: end_idx + 1,
        });
    }
    let est_date = series_dates[end_idx];
    let tensor = outputs
        .processed
        .get(&est_date)
        .ok_or(ModelError::NoExposures { date })?;
    let caps = outputs
        .universe_caps
        .get(&est_date)
        .ok_or(ModelError::NoCaps { date })?;

    // Factor covariance over the trailing window.
    let window = outputs
        .factor_returns
        .window(end_idx, config.ewma.window + 1);
    let factor_cov = match config.cov_model {
        CovModel::NeweyWest => estimate_factor_covariance(
            window,
            outputs.factor_returns.factors(),
            date,
            &config.ewma,
        )?,
        CovModel::RawEwma => {
            estimate_raw_monthly(window, outputs.factor_returns.factors(), date, &config.ewma)?
        }
    };

    // Idio windows per tensor stock, aligned to the idio panel.
    let panel_dates = outputs.idio_returns.dates();
    let panel_end = panel_dates
        .binary_search(&est_date)
        .unwrap_or_else(|i| i.saturating_sub(1));
    let win_len = (config.idio.window + 1).min(panel_end + 1);
    let windows: Vec<Vec<f64>> = tensor
        .stocks()
        .iter()
        .map(|s| {
            let n = outputs
                .idio_returns
                .stocks()
                .iter()
                .position(|x| x == s)
                .expect("tensor stocks are panel stocks");
            outputs.idio_returns.stock_window(n, panel_end, win_len)
        })
        .collect();

    let idio = estimate_idio_variances(&windows, tensor, caps, &config.idio, config.idio_mode)?;

    // Stocks without a usable variance (possible outside the structural
    // mode) are dropped from the snapshot.
    let keep: Vec<usize> = (0..tensor.stocks().len())
        .filter(|&i| idio.variances[i].is_finite())
        .collect();
    let (tensor, idio) = if keep.len() == tensor.stocks().len() {
        (tensor.clone(), idio)
    } else {
        let sub = tensor.select_stocks(&keep);
        let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let idio = IdioVarianceVector {
            stocks: sub.stocks().to_vec(),
            variances: pick(&idio.variances),
            gamma: pick(&idio.gamma),
            h_n: keep.iter().map(|&i| idio.h_n[i]).collect(),
            z_n: pick(&idio.z_n),
            sigma_ts: pick(&idio.sigma_ts),
            sigma_str: pick(&idio.sigma_str),
            mode: idio.mode,
            warnings: idio.warnings.clone(),
        };
        (sub, idio)
    };

    Ok(RiskModelSnapshot::new(date, tensor, factor_cov, idio)?)
}

/// Settings of a rolling bias evaluation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BiasRunConfig {
    /// Number of non-overlapping evaluation windows.
    pub windows: usize,
    /// Forecast horizon in trading days.
    pub horizon: usize,
    /// Volatility-ranked groups in the report.
    pub groups: usize,
}

impl Default for BiasRunConfig {
    fn default() -> Self {
        BiasRunConfig {
            windows: 20,
            horizon: 21,
            groups: 10,
        }
    }
}

/// Rolling bias evaluation output.
pub struct BiasEvaluation {
    pub report: BiasReport,
    /// Raw per-window observations (stock order matches `stocks` per window
    /// universe intersection).
    pub windows: Vec<BiasWindow>,
    /// Per-stock bias statistic over the windows where the stock was
    /// present (at least two).
    pub stock_bias: Vec<(StockId, f64)>,
}

/// Evaluate forecast calibration on non-overlapping windows: at each window
/// start t, forecast per-stock volatility from the snapshot estimated with
/// data before t, then standardize the realized return over the following
/// `horizon` days.
pub fn run_bias_evaluation(
    data: &MarketData,
    outputs: &EstimationOutputs,
    config: &ModelConfig,
    bias: &BiasRunConfig,
) -> Result<BiasEvaluation, ModelError> {
    let dates = data.returns.dates();
    let first_start = config.ewma.window + 1;
    let mut windows = Vec::new();
    let mut per_stock: BTreeMap<StockId, Vec<f64>> = BTreeMap::new();

    for w in 0..bias.windows {
        let start = first_start + w * bias.horizon;
        let end = start + bias.horizon;
        if end > dates.len() {
            break;
        }
        let snapshot = build_snapshot(outputs, config, dates[start])?;
        let mut forecast = Vec::new();
        let mut realized = Vec::new();
        for (i, stock) in snapshot.universe().iter().enumerate() {
            let n = data.returns.stock_index(stock).expect("universe stock");
            let mut r_sum = 0.0;
            for t in start..end {
                if let Some(r) = data.returns.get(t, n) {
                    r_sum += r;
                }
            }
            let vol = snapshot.stock_volatility(i);
            if vol > 0.0 {
                forecast.push(vol);
                realized.push(r_sum);
                per_stock
                    .entry(stock.clone())
                    .or_default()
                    .push(r_sum / vol);
            }
        }
        windows.push(BiasWindow {
            forecast_vol: forecast,
            realized,
        });
    }

    let report = decile_bias(&windows, bias.groups, bias.horizon)?;
    let stock_bias = per_stock
        .into_iter()
        .filter(|(_, b)| b.len() >= 2)
        .map(|(s, b)| {
            let stat = crate::risk::bias_statistic(&b).expect("len >= 2");
            (s, stat)
        })
        .collect();
    Ok(BiasEvaluation {
        report,
        windows,
        stock_bias,
    })
}
