//! Idiosyncratic variance estimation: per-stock EWMA variance, scalar
//! serial-correlation adjustment, and the structural adjustment that blends
//! time-series volatilities with cross-sectionally fitted ones.
//!
//! A per-stock coordination parameter γ ∈ [0, 1] scores data quality from
//! sample completeness and heavy-tailedness:
//!
//! γ = min[1, max(0, (h − 60)/120)] · min[1, exp(1 − Z)],  Z = |σ − σ̃|/σ̃
//!
//! where σ is the equal-weighted sample standard deviation and σ̃ the
//! interquartile-range estimate (Q₃ − Q₁)/1.35. Log-volatilities of clean
//! stocks (γ = 1) are regressed on factor exposures by cap-weighted least
//! squares; the fitted value scaled by E₀ gives a structural volatility
//! σ_STR, and the final volatility is the blend γ·σ_TS + (1 − γ)·σ_STR.
//! Stocks with γ = 1 keep σ_TS exactly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::ewma_mean;
use crate::linalg::weighted_least_squares;
use crate::panel::{ExposureTensor, FactorKind, StockId};

#[derive(Debug, Error)]
pub enum IdioError {
    #[error("insufficient data for {what}: need {required}, have {actual}")]
    InsufficientData {
        what: String,
        required: usize,
        actual: usize,
    },

    #[error("structural fit has {clean} clean stocks for {required} required")]
    InsufficientCleanStocks { clean: usize, required: usize },
}

impl IdioError {
    pub fn code(&self) -> &'static str {
        match self {
            IdioError::InsufficientData { .. } => "InsufficientData",
            IdioError::InsufficientCleanStocks { .. } => "InsufficientCleanStocks",
        }
    }
}

/// Parameters of the idiosyncratic variance estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IdioConfig {
    /// Window length h in trading days (last h+1 observations).
    pub window: usize,
    /// Decay half-life τ in trading days.
    pub half_life: f64,
    /// Serial-correlation lag order for the per-stock adjustment.
    pub nw_lags: usize,
    /// Daily-to-monthly variance scaling.
    pub monthly_scale: f64,
    /// Multiplier applied to the structural fit to undo the log-regression
    /// residual bias.
    pub e0: f64,
    /// Adjusted variances below this fraction of the unadjusted monthly
    /// variance are floored (possible under strong negative autocorrelation;
    /// the diagonal must stay nonnegative).
    pub variance_floor_frac: f64,
}

impl Default for IdioConfig {
    fn default() -> Self {
        IdioConfig {
            window: 252,
            half_life: 90.0,
            nw_lags: 5,
            monthly_scale: 21.0,
            e0: 1.05,
            variance_floor_frac: 0.25,
        }
    }
}

/// Which stage of the estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdioMode {
    /// Monthly-scaled EWMA variance only.
    RawEwma,
    /// Serial-correlation adjusted, no structural blend.
    NeweyWest,
    /// Full chain including the structural adjustment.
    Structural,
}

/// Non-fatal conditions from the estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum IdioWarning {
    /// The adjusted variance fell below the floor and was clamped.
    FlooredVariance { stock: StockId },
    /// Too few clean stocks: structural volatilities fell back to the
    /// cap-weighted mean of clean time-series volatilities.
    StructuralFallback { clean: usize, required: usize },
    /// Zero time-series volatility (constant residual series).
    ZeroVolatility { stock: StockId },
}

/// Per-stock monthly idiosyncratic variances with full diagnostics.
#[derive(Debug, Clone)]
pub struct IdioVarianceVector {
    pub stocks: Vec<StockId>,
    /// Final monthly variances σ̂²; NaN when no estimate exists for a stock
    /// (insufficient data in a mode without the structural fallback).
    pub variances: Vec<f64>,
    pub gamma: Vec<f64>,
    pub h_n: Vec<usize>,
    pub z_n: Vec<f64>,
    pub sigma_ts: Vec<f64>,
    pub sigma_str: Vec<f64>,
    pub mode: IdioMode,
    pub warnings: Vec<IdioWarning>,
}

/// EWMA variance of a residual series (oldest first, NaN = missing).
pub fn idio_ewma_var(series: &[f64], half_life: f64) -> Result<f64, IdioError> {
    let valid = series.iter().filter(|x| x.is_finite()).count();
    if valid < 2 {
        return Err(IdioError::InsufficientData {
            what: "idio variance observations".to_string(),
            required: 2,
            actual: valid,
        });
    }
    let mean = ewma_mean(series, half_life).expect("checked valid count");
    let len = series.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &x) in series.iter().enumerate() {
        if x.is_finite() {
            let w = 0.5f64.powf((len - 1 - i) as f64 / half_life);
            num += w * (x - mean) * (x - mean);
            den += w;
        }
    }
    Ok(num / den)
}

/// Scalar lag-d weighted autocovariance; pairs require both sides valid and
/// carry the decay weight of the later observation. Returns None when no
/// pair exists (heavily gapped series).
fn scalar_autocov(series: &[f64], lag: usize, half_life: f64, mean: f64) -> Option<f64> {
    let len = series.len();
    if len < lag + 1 {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..len - lag {
        let x = series[t];
        let y = series[t + lag];
        if x.is_finite() && y.is_finite() {
            let w = 0.5f64.powf((len - 1 - (t + lag)) as f64 / half_life);
            num += w * (x - mean) * (y - mean);
            den += w;
        }
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Outcome of the per-stock adjusted variance computation.
#[derive(Debug, Clone, Copy)]
pub struct AdjustedVariance {
    /// Monthly variance after adjustment (and flooring if it applied).
    pub variance: f64,
    /// Unadjusted monthly variance, monthly_scale · Ω̂₀.
    pub raw_monthly: f64,
    pub floored: bool,
}

/// Serial-correlation adjusted monthly variance of one residual series:
/// scale · [Ω̂₀ + Σ_{d=1..D} (1 − d/(D+1)) · 2Ω̂_d], floored at
/// `variance_floor_frac` times the unadjusted monthly variance. Lags with no
/// valid pair contribute nothing.
pub fn idio_newey_west(series: &[f64], config: &IdioConfig) -> Result<AdjustedVariance, IdioError> {
    if series.len() <= config.nw_lags + 1 {
        return Err(IdioError::InsufficientData {
            what: "idio adjustment window".to_string(),
            required: config.nw_lags + 2,
            actual: series.len(),
        });
    }
    let omega0 = idio_ewma_var(series, config.half_life)?;
    let mean = ewma_mean(series, config.half_life).expect("validated by idio_ewma_var");
    let mut nw_daily = omega0;
    for d in 1..=config.nw_lags {
        let w = 1.0 - d as f64 / (config.nw_lags as f64 + 1.0);
        if let Some(g) = scalar_autocov(series, d, config.half_life, mean) {
            nw_daily += w * 2.0 * g;
        }
    }
    let raw_monthly = config.monthly_scale * omega0;
    let monthly = config.monthly_scale * nw_daily;
    let floor = config.variance_floor_frac * raw_monthly;
    if monthly < floor {
        Ok(AdjustedVariance {
            variance: floor,
            raw_monthly,
            floored: true,
        })
    } else {
        Ok(AdjustedVariance {
            variance: monthly,
            raw_monthly,
            floored: false,
        })
    }
}

/// Data-quality diagnostics behind the coordination parameter.
#[derive(Debug, Clone, Copy)]
pub struct GammaDiagnostics {
    pub gamma: f64,
    /// Count of valid observations in the window.
    pub h_n: usize,
    /// Heavy-tail score |σ − σ̃|/σ̃ (NaN when undefined).
    pub z_n: f64,
    pub sigma_sample: f64,
    pub sigma_robust: f64,
}

/// The coordination formula itself: completeness term from the valid count,
/// heavy-tail term from Z, both clamped to [0, 1].
pub fn gamma_from_parts(h_n: usize, z_n: f64) -> f64 {
    let v_term = (((h_n as f64) - 60.0) / 120.0).clamp(0.0, 1.0);
    let z_term = if z_n.is_finite() {
        (1.0 - z_n).exp().min(1.0)
    } else {
        0.0
    };
    v_term * z_term
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Coordination parameter of one residual window. Degenerate inputs (fewer
/// than two valid observations, or a zero robust spread with nonzero sample
/// spread) yield γ = 0 rather than an error.
pub fn coordination_gamma(series: &[f64]) -> GammaDiagnostics {
    let valid: Vec<f64> = series.iter().copied().filter(|x| x.is_finite()).collect();
    let h_n = valid.len();
    if h_n < 2 {
        return GammaDiagnostics {
            gamma: 0.0,
            h_n,
            z_n: f64::NAN,
            sigma_sample: f64::NAN,
            sigma_robust: f64::NAN,
        };
    }
    let mean = valid.iter().sum::<f64>() / h_n as f64;
    let ss: f64 = valid.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sigma = (ss / (h_n as f64 - 1.0)).sqrt();
    let mut sorted = valid;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let sigma_robust = (q3 - q1) / 1.35;

    let z_n = if sigma_robust > 0.0 {
        ((sigma - sigma_robust) / sigma_robust).abs()
    } else if sigma == 0.0 {
        // Constant series: no heavy-tail evidence.
        0.0
    } else {
        // All inter-quartile mass at one point but outliers elsewhere.
        f64::INFINITY
    };
    GammaDiagnostics {
        gamma: gamma_from_parts(h_n, z_n),
        h_n,
        z_n,
        sigma_sample: sigma,
        sigma_robust,
    }
}

/// Cross-sectional structural volatilities: regress ln(σ_TS) of clean stocks
/// (γ = 1, σ_TS > 0) on an intercept plus industry and style exposures with
/// market caps as weights, then predict E₀·exp(x·b) for every stock.
///
/// The industry block sums to the intercept column, so the design is
/// intentionally rank-deficient; predictions are invariant to the dropped
/// direction because every stock's exposure row satisfies the same linear
/// relation. With too few clean stocks the fit degrades to the cap-weighted
/// mean of clean σ_TS, reported as a warning.
pub fn structural_fit(
    sigma_ts: &[f64],
    tensor: &ExposureTensor,
    caps: &[f64],
    gamma: &[f64],
    e0: f64,
) -> Result<(Vec<f64>, Option<IdioWarning>), IdioError> {
    let n = sigma_ts.len();
    assert_eq!(n, tensor.stocks().len());
    assert_eq!(n, caps.len());
    assert_eq!(n, gamma.len());

    let clean: Vec<usize> = (0..n)
        .filter(|&i| gamma[i] == 1.0 && sigma_ts[i].is_finite() && sigma_ts[i] > 0.0)
        .collect();

    let cols: Vec<usize> = tensor
        .indices_of(FactorKind::Industry)
        .chain(tensor.indices_of(FactorKind::Style))
        .collect();
    let n_params = cols.len() + 1;
    let required = n_params + 5;

    if clean.len() < required {
        // Fallback: cap-weighted mean of clean time-series volatilities.
        let basis: Vec<usize> = if clean.is_empty() {
            (0..n)
                .filter(|&i| sigma_ts[i].is_finite() && sigma_ts[i] > 0.0)
                .collect()
        } else {
            clean.clone()
        };
        if basis.is_empty() {
            return Err(IdioError::InsufficientCleanStocks { clean: 0, required });
        }
        let wsum: f64 = basis.iter().map(|&i| caps[i]).sum();
        let mean: f64 = basis.iter().map(|&i| caps[i] * sigma_ts[i]).sum::<f64>() / wsum;
        return Ok((
            vec![mean; n],
            Some(IdioWarning::StructuralFallback {
                clean: clean.len(),
                required,
            }),
        ));
    }

    let values = tensor.values();
    let mut design = Array2::zeros((clean.len(), n_params));
    let mut target = ndarray::Array1::zeros(clean.len());
    let mut weights = ndarray::Array1::zeros(clean.len());
    for (r, &i) in clean.iter().enumerate() {
        design[[r, 0]] = 1.0;
        for (c, &j) in cols.iter().enumerate() {
            design[[r, c + 1]] = values[[i, j]];
        }
        target[r] = sigma_ts[i].ln();
        weights[r] = caps[i];
    }
    let (beta, _) = weighted_least_squares(design.view(), target.view(), weights.view());

    let sigma_str = (0..n)
        .map(|i| {
            let mut fit = beta[0];
            for (c, &j) in cols.iter().enumerate() {
                fit += values[[i, j]] * beta[c + 1];
            }
            e0 * fit.exp()
        })
        .collect();
    Ok((sigma_str, None))
}

/// Convex blend σ̂ = γ·σ_TS + (1 − γ)·σ_STR per stock; γ = 1 returns σ_TS
/// exactly.
pub fn blend(sigma_ts: &[f64], sigma_str: &[f64], gamma: &[f64]) -> Vec<f64> {
    sigma_ts
        .iter()
        .zip(sigma_str)
        .zip(gamma)
        .map(|((&ts, &st), &g)| {
            if g == 1.0 {
                ts
            } else {
                g * ts + (1.0 - g) * st
            }
        })
        .collect()
}

/// Run the estimator over per-stock residual windows (oldest first, NaN =
/// missing), all aligned with the tensor's stock order.
pub fn estimate_idio_variances(
    windows: &[Vec<f64>],
    tensor: &ExposureTensor,
    caps: &[f64],
    config: &IdioConfig,
    mode: IdioMode,
) -> Result<IdioVarianceVector, IdioError> {
    let n = windows.len();
    assert_eq!(n, tensor.stocks().len());
    let stocks = tensor.stocks().to_vec();
    let mut warnings = Vec::new();

    let mut sigma_ts = vec![f64::NAN; n];
    let mut gamma = vec![0.0; n];
    let mut h_n = vec![0usize; n];
    let mut z_n = vec![f64::NAN; n];

    for i in 0..n {
        let g = coordination_gamma(&windows[i]);
        gamma[i] = g.gamma;
        h_n[i] = g.h_n;
        z_n[i] = g.z_n;
        let var = match mode {
            IdioMode::RawEwma => {
                idio_ewma_var(&windows[i], config.half_life).map(|v| v * config.monthly_scale)
            }
            IdioMode::NeweyWest | IdioMode::Structural => {
                match idio_newey_west(&windows[i], config) {
                    Ok(adj) => {
                        if adj.floored {
                            warnings.push(IdioWarning::FlooredVariance {
                                stock: stocks[i].clone(),
                            });
                        }
                        Ok(adj.variance)
                    }
                    Err(e) => Err(e),
                }
            }
        };
        match var {
            Ok(v) => {
                sigma_ts[i] = v.sqrt();
                if v == 0.0 {
                    warnings.push(IdioWarning::ZeroVolatility {
                        stock: stocks[i].clone(),
                    });
                }
            }
            Err(_) => {
                // Not enough data for a time-series estimate; the structural
                // path covers the stock, other modes leave it NaN.
                sigma_ts[i] = f64::NAN;
                gamma[i] = 0.0;
            }
        }
    }

    let (sigma_str, blended) = match mode {
        IdioMode::Structural => {
            let (s, warn) = structural_fit(&sigma_ts, tensor, caps, &gamma, config.e0)?;
            if let Some(w) = warn {
                warnings.push(w);
            }
            let b = blend(&sigma_ts, &s, &gamma);
            (s, b)
        }
        _ => (vec![f64::NAN; n], sigma_ts.clone()),
    };

    let variances = blended.iter().map(|v| v * v).collect();
    Ok(IdioVarianceVector {
        stocks,
        variances,
        gamma,
        h_n,
        z_n,
        sigma_ts,
        sigma_str,
        mode,
        warnings,
    })
}
