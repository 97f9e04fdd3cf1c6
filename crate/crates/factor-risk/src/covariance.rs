//! Factor-return covariance estimation: exponentially weighted moving
//! average with a Bartlett-weighted serial-correlation adjustment and
//! daily-to-monthly scaling.
//!
//! Observation weights decay as λ_s = 0.5^(s/τ) with age s in trading days.
//! The raw estimate uses pairwise-complete products around EWMA means; the
//! adjustment adds lag-d cross-products Ω̂_d (demeaned by default) weighted
//! by 1 − d/(D+1), and the result is scaled to the monthly horizon:
//!
//! F = scale · [F_raw + Σ_{d=1..D} (1 − d/(D+1)) (Ω̂_d + Ω̂_dᵀ)]
//!
//! Positive semi-definiteness is verified by eigendecomposition and never
//! silently repaired; a violation signals an upstream data problem.

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::eigen_extremes;

/// Relative tolerance for the PSD check: min eigenvalue must be at least
/// −PSD_TOL · max eigenvalue.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error("series has no valid observations")]
    EmptySeries,

    #[error("insufficient data for {what}: need {required}, have {actual}")]
    InsufficientData {
        what: String,
        required: usize,
        actual: usize,
    },

    #[error(
        "covariance matrix is not positive semi-definite (min eig {min_eig}, max eig {max_eig})"
    )]
    NotPsd { min_eig: f64, max_eig: f64 },
}

impl CovarianceError {
    pub fn code(&self) -> &'static str {
        match self {
            CovarianceError::EmptySeries => "EmptySeries",
            CovarianceError::InsufficientData { .. } => "InsufficientData",
            CovarianceError::NotPsd { .. } => "NotPSD",
        }
    }
}

/// EWMA window and adjustment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EwmaConfig {
    /// Window length h in trading days; estimates use the last h+1
    /// observations.
    pub window: usize,
    /// Half-life τ of the decay weights, in trading days.
    pub half_life: f64,
    /// Serial-correlation adjustment lag order D.
    pub nw_lags: usize,
    /// Daily-to-monthly variance scaling.
    pub monthly_scale: f64,
    /// Demean the lagged cross-products with the EWMA means (keeps the lag
    /// matrices consistent with the raw estimate). Raw products when false.
    pub demean_lags: bool,
}

impl Default for EwmaConfig {
    fn default() -> Self {
        EwmaConfig {
            window: 252,
            half_life: 90.0,
            nw_lags: 2,
            monthly_scale: 21.0,
            demean_lags: true,
        }
    }
}

impl EwmaConfig {
    pub fn validate(&self) {
        assert!(self.window >= 2, "window must be at least 2");
        assert!(self.half_life > 0.0, "half-life must be positive");
        assert!(
            self.nw_lags < self.window,
            "lag order must be below the window"
        );
        assert!(
            self.monthly_scale >= 1.0,
            "monthly scale must be at least 1"
        );
    }
}

/// Estimation stage of a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceStage {
    /// Daily EWMA estimate, no adjustment.
    Raw,
    /// Serial-correlation adjusted, still daily.
    NeweyWest,
    /// Adjusted and scaled to the monthly horizon.
    Monthly,
}

/// A factors × factors covariance estimate with its stage tag.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub factors: Vec<String>,
    pub matrix: Array2<f64>,
    pub stage: CovarianceStage,
    pub date: NaiveDate,
}

impl CovarianceEstimate {
    /// Verify symmetry and positive semi-definiteness per the type
    /// invariants.
    pub fn check(&self) -> Result<(), CovarianceError> {
        let k = self.matrix.nrows();
        for i in 0..k {
            for j in i + 1..k {
                debug_assert!((self.matrix[[i, j]] - self.matrix[[j, i]]).abs() < 1e-12);
            }
        }
        let (min_eig, max_eig) = eigen_extremes(self.matrix.view());
        if min_eig < -PSD_TOL * max_eig.max(0.0) {
            return Err(CovarianceError::NotPsd { min_eig, max_eig });
        }
        Ok(())
    }
}

fn decay(age: usize, half_life: f64) -> f64 {
    0.5f64.powf(age as f64 / half_life)
}

/// Weighted mean of a series (oldest first) over its valid entries; the
/// newest observation has age 0.
pub fn ewma_mean(series: &[f64], half_life: f64) -> Result<f64, CovarianceError> {
    let len = series.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &x) in series.iter().enumerate() {
        if x.is_finite() {
            let w = decay(len - 1 - i, half_life);
            num += w * x;
            den += w;
        }
    }
    if den == 0.0 {
        return Err(CovarianceError::EmptySeries);
    }
    Ok(num / den)
}

/// Weighted covariance of two equally long series (oldest first) over their
/// jointly valid entries, with each series demeaned by its own EWMA mean.
pub fn ewma_cov(a: &[f64], b: &[f64], half_life: f64) -> Result<f64, CovarianceError> {
    assert_eq!(a.len(), b.len());
    let ma = ewma_mean(a, half_life)?;
    let mb = ewma_mean(b, half_life)?;
    let len = a.len();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut joint = 0usize;
    for i in 0..len {
        if a[i].is_finite() && b[i].is_finite() {
            let w = decay(len - 1 - i, half_life);
            // Grouped so the argument order cannot change the rounding:
            // ewma_cov(a, b) == ewma_cov(b, a) bit for bit.
            num += w * ((a[i] - ma) * (b[i] - mb));
            den += w;
            joint += 1;
        }
    }
    if joint < 2 {
        return Err(CovarianceError::InsufficientData {
            what: "jointly valid observations".to_string(),
            required: 2,
            actual: joint,
        });
    }
    Ok(num / den)
}

/// Raw EWMA covariance matrix of a T×K panel (rows oldest first).
pub fn ewma_cov_matrix(
    panel: ArrayView2<'_, f64>,
    half_life: f64,
) -> Result<Array2<f64>, CovarianceError> {
    let k = panel.ncols();
    let mut out = Array2::zeros((k, k));
    let cols: Vec<Vec<f64>> = (0..k).map(|j| panel.column(j).to_vec()).collect();
    for a in 0..k {
        for b in a..k {
            let c = ewma_cov(&cols[a], &cols[b], half_life)?;
            out[[a, b]] = c;
            out[[b, a]] = c;
        }
    }
    Ok(out)
}

/// Lag-d weighted cross-product matrix Ω̂_d of a T×K panel (rows oldest
/// first). The pair (t, t+d) carries the decay weight of its later
/// observation; pairs are included only when both sides are valid.
pub fn autocov_lag(
    panel: ArrayView2<'_, f64>,
    lag: usize,
    half_life: f64,
    demean: bool,
) -> Result<Array2<f64>, CovarianceError> {
    let (t_len, k) = panel.dim();
    assert!(lag >= 1, "autocov_lag requires lag >= 1");
    if t_len < lag + 2 {
        return Err(CovarianceError::InsufficientData {
            what: format!("lag-{lag} autocovariance"),
            required: lag + 2,
            actual: t_len,
        });
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| panel.column(j).to_vec()).collect();
    let mut means = vec![0.0; k];
    if demean {
        for j in 0..k {
            means[j] = ewma_mean(&cols[j], half_life)?;
        }
    }
    let mut out = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let mut num = 0.0;
            let mut den = 0.0;
            for t in 0..t_len - lag {
                let x = cols[a][t];
                let y = cols[b][t + lag];
                if x.is_finite() && y.is_finite() {
                    let w = decay(t_len - 1 - (t + lag), half_life);
                    num += w * (x - means[a]) * (y - means[b]);
                    den += w;
                }
            }
            if den == 0.0 {
                return Err(CovarianceError::InsufficientData {
                    what: format!("lag-{lag} pairs for factors {a},{b}"),
                    required: 1,
                    actual: 0,
                });
            }
            out[[a, b]] = num / den;
        }
    }
    Ok(out)
}

/// Assemble the adjusted monthly covariance from a raw estimate and its lag
/// matrices. The output is symmetrized and PSD-verified.
pub fn newey_west(
    f_raw: &Array2<f64>,
    lags: &[Array2<f64>],
    monthly_scale: f64,
    factors: Vec<String>,
    date: NaiveDate,
) -> Result<CovarianceEstimate, CovarianceError> {
    let k = f_raw.nrows();
    let d_max = lags.len();
    let mut m = f_raw.clone();
    for (idx, lag) in lags.iter().enumerate() {
        let d = idx + 1;
        let w = 1.0 - d as f64 / (d_max as f64 + 1.0);
        for i in 0..k {
            for j in 0..k {
                m[[i, j]] += w * (lag[[i, j]] + lag[[j, i]]);
            }
        }
    }
    m.mapv_inplace(|x| x * monthly_scale);
    for i in 0..k {
        for j in i + 1..k {
            let s = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = s;
            m[[j, i]] = s;
        }
    }
    let est = CovarianceEstimate {
        factors,
        matrix: m,
        stage: CovarianceStage::Monthly,
        date,
    };
    est.check()?;
    Ok(est)
}

/// Full estimation for one date: take the trailing window of a factor-return
/// panel (rows oldest first, ending at the estimation date), estimate the raw
/// EWMA matrix, adjust for serial correlation, and scale to monthly.
pub fn estimate_factor_covariance(
    window_panel: ArrayView2<'_, f64>,
    factors: &[String],
    date: NaiveDate,
    config: &EwmaConfig,
) -> Result<CovarianceEstimate, CovarianceError> {
    config.validate();
    let t_len = window_panel.nrows();
    if t_len < config.nw_lags + 2 {
        return Err(CovarianceError::InsufficientData {
            what: "factor covariance window".to_string(),
            required: config.nw_lags + 2,
            actual: t_len,
        });
    }
    let raw = ewma_cov_matrix(window_panel, config.half_life)?;
    let mut lags = Vec::with_capacity(config.nw_lags);
    for d in 1..=config.nw_lags {
        lags.push(autocov_lag(
            window_panel,
            d,
            config.half_life,
            config.demean_lags,
        )?);
    }
    newey_west(&raw, &lags, config.monthly_scale, factors.to_vec(), date)
}

/// Raw-EWMA-only monthly matrix (no serial-correlation adjustment), used for
/// model comparisons in bias reporting.
pub fn estimate_raw_monthly(
    window_panel: ArrayView2<'_, f64>,
    factors: &[String],
    date: NaiveDate,
    config: &EwmaConfig,
) -> Result<CovarianceEstimate, CovarianceError> {
    config.validate();
    let raw = ewma_cov_matrix(window_panel, config.half_life)?;
    newey_west(&raw, &[], config.monthly_scale, factors.to_vec(), date)
}
