//! Assembled risk model for one estimation date and its validation.
//!
//! The stock covariance V = XFXᵀ + Δ is never materialized: every quadratic
//! form is evaluated through the factored representation
//! wᵀVw = (Xᵀw)ᵀF(Xᵀw) + Σ wₙ²δₙ, keeping cost at O(N·K) for universes far
//! larger than the factor count.
//!
//! Forecast quality is scored with bias statistics: the standardized return
//! b = r/σ over a forecast horizon has standard deviation 1 under perfect
//! risk forecasts; B > 1 flags underestimated risk, B < 1 overestimated.

use chrono::NaiveDate;
use ndarray::Array1;
use thiserror::Error;

use crate::covariance::{CovarianceEstimate, CovarianceStage};
use crate::idio::IdioVarianceVector;
use crate::panel::{ExposureTensor, StockId};

/// Default forecast horizon in trading days, matching the monthly scaling
/// of the covariance matrices.
pub const DEFAULT_HORIZON: usize = 21;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },

    #[error("zero forecast volatility for stock {stock}")]
    ZeroForecastVol { stock: String },

    #[error("bias statistic needs at least 2 windows, have {actual}")]
    InsufficientWindows { actual: usize },

    #[error("decile grouping needs at least {required} stocks, have {actual}")]
    TooFewStocks { required: usize, actual: usize },
}

impl RiskError {
    pub fn code(&self) -> &'static str {
        match self {
            RiskError::DimensionMismatch { .. } => "DimensionMismatch",
            RiskError::ZeroForecastVol { .. } => "ZeroForecastVol",
            RiskError::InsufficientWindows { .. } => "InsufficientWindows",
            RiskError::TooFewStocks { .. } => "TooFewStocks",
        }
    }
}

/// One estimation date's exposures, monthly factor covariance, and
/// idiosyncratic variances, with consistent orderings.
#[derive(Debug, Clone)]
pub struct RiskModelSnapshot {
    pub date: NaiveDate,
    pub exposures: ExposureTensor,
    pub factor_cov: CovarianceEstimate,
    pub idio: IdioVarianceVector,
}

impl RiskModelSnapshot {
    pub fn new(
        date: NaiveDate,
        exposures: ExposureTensor,
        factor_cov: CovarianceEstimate,
        idio: IdioVarianceVector,
    ) -> Result<Self, RiskError> {
        if exposures.factors() != factor_cov.factors.as_slice() {
            return Err(RiskError::DimensionMismatch {
                detail: "factor orderings of exposures and covariance differ".to_string(),
            });
        }
        if exposures.stocks() != idio.stocks.as_slice() {
            return Err(RiskError::DimensionMismatch {
                detail: "stock orderings of exposures and idio variances differ".to_string(),
            });
        }
        if factor_cov.stage != CovarianceStage::Monthly {
            return Err(RiskError::DimensionMismatch {
                detail: "snapshot requires a monthly-stage covariance".to_string(),
            });
        }
        for (i, v) in idio.variances.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(RiskError::DimensionMismatch {
                    detail: format!("idio variance of {} is {v}", idio.stocks[i]),
                });
            }
        }
        Ok(RiskModelSnapshot {
            date,
            exposures,
            factor_cov,
            idio,
        })
    }

    pub fn universe(&self) -> &[StockId] {
        self.exposures.stocks()
    }

    pub fn n_stocks(&self) -> usize {
        self.exposures.stocks().len()
    }

    pub fn n_factors(&self) -> usize {
        self.exposures.factors().len()
    }

    /// Factor loadings of a portfolio: Xᵀw.
    pub fn factor_loadings(&self, weights: &[f64]) -> Result<Array1<f64>, RiskError> {
        if weights.len() != self.n_stocks() {
            return Err(RiskError::DimensionMismatch {
                detail: format!("{} weights for {} stocks", weights.len(), self.n_stocks()),
            });
        }
        let w = Array1::from_iter(weights.iter().copied());
        Ok(self.exposures.values().t().dot(&w))
    }

    /// Monthly portfolio variance wᵀVw through the factored form.
    pub fn portfolio_variance(&self, weights: &[f64]) -> Result<f64, RiskError> {
        let loadings = self.factor_loadings(weights)?;
        let factor_var = loadings.dot(&self.factor_cov.matrix.dot(&loadings));
        let idio_var: f64 = weights
            .iter()
            .zip(&self.idio.variances)
            .map(|(w, v)| w * w * v)
            .sum();
        Ok(factor_var + idio_var)
    }

    pub fn portfolio_volatility(&self, weights: &[f64]) -> Result<f64, RiskError> {
        Ok(self.portfolio_variance(weights)?.max(0.0).sqrt())
    }

    /// Monthly variance forecast of a single stock: xₙᵀF xₙ + δₙ.
    pub fn stock_variance(&self, n: usize) -> f64 {
        let x = self.exposures.values().row(n);
        let fx = self.factor_cov.matrix.dot(&x);
        x.dot(&fx) + self.idio.variances[n]
    }

    pub fn stock_volatility(&self, n: usize) -> f64 {
        self.stock_variance(n).max(0.0).sqrt()
    }
}

/// Standardized out-of-sample return b = r/σ for one asset and window.
pub fn standardized_return(
    realized: f64,
    forecast_vol: f64,
    stock: &str,
) -> Result<f64, RiskError> {
    if !(forecast_vol > 0.0) {
        return Err(RiskError::ZeroForecastVol {
            stock: stock.to_string(),
        });
    }
    Ok(realized / forecast_vol)
}

/// Bias statistic: sample standard deviation of standardized returns over
/// the evaluation windows. Perfect forecasts give values near one.
pub fn bias_statistic(b_series: &[f64]) -> Result<f64, RiskError> {
    let t = b_series.len();
    if t < 2 {
        return Err(RiskError::InsufficientWindows { actual: t });
    }
    let mean = b_series.iter().sum::<f64>() / t as f64;
    let ss: f64 = b_series.iter().map(|b| (b - mean) * (b - mean)).sum();
    Ok((ss / (t as f64 - 1.0)).sqrt())
}

/// One evaluation window's observations: per-stock forecast volatility and
/// realized return over the same horizon.
#[derive(Debug, Clone)]
pub struct BiasWindow {
    pub forecast_vol: Vec<f64>,
    pub realized: Vec<f64>,
}

/// Bias statistic of one volatility-ranked group.
#[derive(Debug, Clone)]
pub struct BiasGroup {
    pub group: usize,
    pub mean_bias: f64,
    pub n_obs: usize,
}

/// Decile-grouped bias report.
#[derive(Debug, Clone)]
pub struct BiasReport {
    pub groups: Vec<BiasGroup>,
    pub windows: usize,
    pub horizon: usize,
}

impl BiasReport {
    /// Mean absolute deviation of the group statistics from one — the
    /// aggregate calibration score used for model comparisons.
    pub fn mean_abs_deviation(&self) -> f64 {
        let s: f64 = self.groups.iter().map(|g| (g.mean_bias - 1.0).abs()).sum();
        s / self.groups.len() as f64
    }
}

/// Group stocks by forecast volatility each window (ascending, ties broken
/// by stock order for determinism), pool the standardized returns of each
/// group across windows, and report the per-group bias statistic.
pub fn decile_bias(
    windows: &[BiasWindow],
    n_groups: usize,
    horizon: usize,
) -> Result<BiasReport, RiskError> {
    if windows.len() < 2 {
        return Err(RiskError::InsufficientWindows {
            actual: windows.len(),
        });
    }
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); n_groups];
    for w in windows {
        let n = w.forecast_vol.len();
        if n != w.realized.len() {
            return Err(RiskError::DimensionMismatch {
                detail: "forecast and realized lengths differ".to_string(),
            });
        }
        if n < n_groups {
            return Err(RiskError::TooFewStocks {
                required: n_groups,
                actual: n,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            w.forecast_vol[a]
                .partial_cmp(&w.forecast_vol[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        for g in 0..n_groups {
            let lo = g * n / n_groups;
            let hi = (g + 1) * n / n_groups;
            for &i in &order[lo..hi] {
                let b = standardized_return(w.realized[i], w.forecast_vol[i], "<grouped>")?;
                pooled[g].push(b);
            }
        }
    }
    let groups = pooled
        .into_iter()
        .enumerate()
        .map(|(g, b)| {
            let stat = bias_statistic(&b)?;
            Ok(BiasGroup {
                group: g,
                mean_bias: stat,
                n_obs: b.len(),
            })
        })
        .collect::<Result<Vec<_>, RiskError>>()?;
    Ok(BiasReport {
        groups,
        windows: windows.len(),
        horizon,
    })
}
