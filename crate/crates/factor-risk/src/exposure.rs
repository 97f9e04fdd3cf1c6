//! Four-step style-exposure processing: median-absolute-deviation
//! depolarisation, industry-mean missing-value fill, cross-sectional
//! standardization, and cap-weighted orthogonalization with
//! re-standardization.
//!
//! Industry and country columns pass through untouched; only style columns
//! are processed. Step order is fixed: depolarise → fill → standardize →
//! orthogonalize → re-standardize.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{weighted_least_squares, PivotedQr, RANK_TOL};
use crate::panel::{ExposureTensor, FactorKind};

#[derive(Debug, Error)]
pub enum ExposureError {
    #[error("column {column} has fewer than 2 valid values")]
    TooFewValues { column: String },

    #[error("column {column} is entirely missing")]
    AllMissing { column: String },

    #[error("column {column} has zero cross-sectional variance")]
    ZeroVariance { column: String },

    #[error("orthogonalization design for {column} is rank deficient")]
    RankDeficient { column: String },

    #[error("orthogonalization plan references unknown or non-style factor {name}")]
    UnknownFactor { name: String },

    #[error("factor {name} appears as its own regressor")]
    SelfRegression { name: String },
}

impl ExposureError {
    pub fn code(&self) -> &'static str {
        match self {
            ExposureError::TooFewValues { .. } => "TooFewValues",
            ExposureError::AllMissing { .. } => "AllMissing",
            ExposureError::ZeroVariance { .. } => "ZeroVariance",
            ExposureError::RankDeficient { .. } => "RankDeficient",
            ExposureError::UnknownFactor { .. } => "UnknownFactor",
            ExposureError::SelfRegression { .. } => "SelfRegression",
        }
    }
}

/// Weighting used for the standardization mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizationWeighting {
    /// Equal-weighted mean and unit sample standard deviation.
    #[default]
    Equal,
    /// Cap-weighted mean, unit sample standard deviation.
    CapWeightedMean,
}

/// Configuration for the exposure pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Width of the clipping band in MAD units.
    pub mad_multiplier: f64,
    /// (target style factor, regressor style factors) pairs, applied in
    /// order after standardization.
    pub ortho_plan: Vec<(String, Vec<String>)>,
    /// Mean convention for standardization.
    pub std_weighting: StandardizationWeighting,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mad_multiplier: 3.0,
            ortho_plan: Vec::new(),
            std_weighting: StandardizationWeighting::Equal,
        }
    }
}

impl PipelineConfig {
    /// The plan used throughout this crate's examples: residual volatility
    /// orthogonalized to size and beta, liquidity to size. Entries are kept
    /// only when the named factors exist in the tensor.
    pub fn standard_ortho_plan() -> Vec<(String, Vec<String>)> {
        vec![
            (
                "ResidualVolatility".to_string(),
                vec!["Size".to_string(), "Beta".to_string()],
            ),
            ("Liquidity".to_string(), vec!["Size".to_string()]),
        ]
    }

    fn validate(&self, tensor: &ExposureTensor) -> Result<(), ExposureError> {
        assert!(self.mad_multiplier > 0.0, "mad_multiplier must be positive");
        for (target, regressors) in &self.ortho_plan {
            for name in std::iter::once(target).chain(regressors) {
                match tensor.factor_index(name) {
                    Some(j) if tensor.kinds()[j] == FactorKind::Style => {}
                    _ => return Err(ExposureError::UnknownFactor { name: name.clone() }),
                }
            }
            if regressors.contains(target) {
                return Err(ExposureError::SelfRegression {
                    name: target.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Non-fatal conditions surfaced by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineWarning {
    /// All valid values identical: the clipping band has zero width but
    /// equals every value, so the column passes through unchanged.
    DegenerateColumn { column: String },
    /// An industry had no valid exposure to average; the cross-sectional
    /// mean was used for its missing entries instead.
    IndustryFallback { column: String, industry: usize },
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn median_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(median_sorted(&v))
}

/// Clip a column to median ± mult·MAD over its valid entries. Masked (NaN)
/// entries pass through untouched. Returns the clipped column and a warning
/// when the column is degenerate (MAD = 0 with all values identical).
pub fn depolarise(
    column: &[f64],
    mult: f64,
    name: &str,
) -> Result<(Vec<f64>, Option<PipelineWarning>), ExposureError> {
    let n_valid = column.iter().filter(|x| x.is_finite()).count();
    if n_valid < 2 {
        return Err(ExposureError::TooFewValues {
            column: name.to_string(),
        });
    }
    let med = median_of(column.iter().copied()).expect("checked nonempty");
    let mad = median_of(
        column
            .iter()
            .filter(|x| x.is_finite())
            .map(|x| (x - med).abs()),
    )
    .expect("checked nonempty");
    let warning = if mad == 0.0 {
        Some(PipelineWarning::DegenerateColumn {
            column: name.to_string(),
        })
    } else {
        None
    };
    let lo = med - mult * mad;
    let hi = med + mult * mad;
    let out = column
        .iter()
        .map(|&x| if !x.is_finite() { x } else { x.clamp(lo, hi) })
        .collect();
    Ok((out, warning))
}

/// Replace masked entries with the equal-weighted mean of valid same-industry
/// exposures; industries with no valid member fall back to the
/// cross-sectional mean. Valid entries are never altered.
pub fn fill_missing(
    column: &[f64],
    industry_of_stock: &[usize],
    name: &str,
) -> Result<(Vec<f64>, Vec<PipelineWarning>), ExposureError> {
    assert_eq!(column.len(), industry_of_stock.len());
    let valid: Vec<f64> = column.iter().copied().filter(|x| x.is_finite()).collect();
    if valid.is_empty() {
        return Err(ExposureError::AllMissing {
            column: name.to_string(),
        });
    }
    let grand_mean = valid.iter().sum::<f64>() / valid.len() as f64;

    let mut sums: std::collections::BTreeMap<usize, (f64, usize)> =
        std::collections::BTreeMap::new();
    for (i, &x) in column.iter().enumerate() {
        if x.is_finite() {
            let e = sums.entry(industry_of_stock[i]).or_insert((0.0, 0));
            e.0 += x;
            e.1 += 1;
        }
    }

    let mut warnings = Vec::new();
    let mut warned: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
    let out = column
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x.is_finite() {
                x
            } else {
                let ind = industry_of_stock[i];
                match sums.get(&ind) {
                    Some(&(s, c)) if c > 0 => s / c as f64,
                    _ => {
                        if warned.insert(ind) {
                            warnings.push(PipelineWarning::IndustryFallback {
                                column: name.to_string(),
                                industry: ind,
                            });
                        }
                        grand_mean
                    }
                }
            }
        })
        .collect();
    Ok((out, warnings))
}

/// Z-score a complete column: output has mean 0 (equal- or cap-weighted per
/// config) and unit sample standard deviation.
pub fn standardize(
    column: &[f64],
    cap_weights: Option<&[f64]>,
    name: &str,
) -> Result<Vec<f64>, ExposureError> {
    let n = column.len();
    assert!(
        column.iter().all(|x| x.is_finite()),
        "standardize requires a complete column"
    );
    if n < 2 {
        return Err(ExposureError::TooFewValues {
            column: name.to_string(),
        });
    }
    let mean = match cap_weights {
        None => column.iter().sum::<f64>() / n as f64,
        Some(w) => {
            let total: f64 = w.iter().sum();
            column.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>() / total
        }
    };
    // Dispersion is always the equal-weighted sample standard deviation.
    let eq_mean = column.iter().sum::<f64>() / n as f64;
    let ss: f64 = column.iter().map(|x| (x - eq_mean) * (x - eq_mean)).sum();
    let std = (ss / (n as f64 - 1.0)).sqrt();
    if std <= 1e-12 {
        return Err(ExposureError::ZeroVariance {
            column: name.to_string(),
        });
    }
    Ok(column.iter().map(|x| (x - mean) / std).collect())
}

/// Residual of a cap-weighted least-squares regression of `target` on an
/// intercept plus `regressors`. Residuals are cap-weightedly uncorrelated
/// with every regressor; the caller re-standardizes afterwards.
pub fn orthogonalize(
    target: &[f64],
    regressors: &[&[f64]],
    cap_weights: &[f64],
    name: &str,
) -> Result<Vec<f64>, ExposureError> {
    let n = target.len();
    let k = regressors.len();
    let mut design = Array2::zeros((n, k + 1));
    for i in 0..n {
        design[[i, 0]] = 1.0;
        for (j, reg) in regressors.iter().enumerate() {
            design[[i, j + 1]] = reg[i];
        }
    }
    let y = Array1::from_iter(target.iter().copied());
    let w = Array1::from_iter(cap_weights.iter().copied());

    // Rank check under the weight metric.
    let mut scaled = design.clone();
    for i in 0..n {
        let s = w[i].max(0.0).sqrt();
        for j in 0..=k {
            scaled[[i, j]] *= s;
        }
    }
    let qr = PivotedQr::decompose(scaled.view(), RANK_TOL);
    if qr.rank() < k + 1 {
        return Err(ExposureError::RankDeficient {
            column: name.to_string(),
        });
    }

    let (beta, _) = weighted_least_squares(design.view(), y.view(), w.view());
    let fitted = design.dot(&beta);
    Ok((0..n).map(|i| target[i] - fitted[i]).collect())
}

/// Outcome of running the pipeline on one tensor.
#[derive(Debug)]
pub struct PipelineOutput {
    pub tensor: ExposureTensor,
    pub warnings: Vec<PipelineWarning>,
}

/// Process every style column of a tensor through the four steps, leaving
/// industry and country columns untouched. Orthogonalization regressors are
/// taken at their post-standardization (step 3) state.
pub fn run_pipeline(
    tensor: &ExposureTensor,
    caps: &[f64],
    config: &PipelineConfig,
) -> Result<PipelineOutput, ExposureError> {
    config.validate(tensor)?;
    assert_eq!(
        caps.len(),
        tensor.stocks().len(),
        "caps must align with tensor stocks"
    );
    let industry_of_stock = tensor.industry_of_stocks();
    let mut values = tensor.values().clone();
    let mut warnings = Vec::new();

    let style_cols: Vec<usize> = tensor.indices_of(FactorKind::Style).collect();
    let cap_mean_weights = match config.std_weighting {
        StandardizationWeighting::Equal => None,
        StandardizationWeighting::CapWeightedMean => Some(caps),
    };

    // Steps 1–3 per style column.
    for &j in &style_cols {
        let name = &tensor.factors()[j];
        let col: Vec<f64> = values.column(j).to_vec();
        let (clipped, w1) = depolarise(&col, config.mad_multiplier, name)?;
        if let Some(w) = w1 {
            warnings.push(w);
        }
        let (filled, w2) = fill_missing(&clipped, &industry_of_stock, name)?;
        warnings.extend(w2);
        let scored = standardize(&filled, cap_mean_weights, name)?;
        for (i, v) in scored.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }

    // Step 4: orthogonalize plan targets on their (standardized) regressors,
    // then re-standardize the residuals.
    for (target, regressors) in &config.ortho_plan {
        let tj = tensor.factor_index(target).expect("validated");
        let reg_cols: Vec<Vec<f64>> = regressors
            .iter()
            .map(|r| {
                values
                    .column(tensor.factor_index(r).expect("validated"))
                    .to_vec()
            })
            .collect();
        let reg_refs: Vec<&[f64]> = reg_cols.iter().map(|c| c.as_slice()).collect();
        let tcol: Vec<f64> = values.column(tj).to_vec();
        let resid = orthogonalize(&tcol, &reg_refs, caps, target)?;
        let scored = standardize(&resid, cap_mean_weights, target)?;
        for (i, v) in scored.iter().enumerate() {
            values[[i, tj]] = *v;
        }
    }

    Ok(PipelineOutput {
        tensor: tensor.with_values(values),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::StockId;
    use crate::reference;
    use chrono::NaiveDate;
    use ndarray::Array2;

    #[test]
    fn depolarise_spec_example() {
        let (out, warn) = depolarise(&[1.0, 2.0, 3.0, 100.0], 3.0, "x").unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 5.5]);
        assert!(warn.is_none());
    }

    #[test]
    fn depolarise_degenerate_passes_through_with_warning() {
        let (out, warn) = depolarise(&[5.0, 5.0, 5.0, 5.0], 3.0, "x").unwrap();
        assert_eq!(out, vec![5.0; 4]);
        assert!(matches!(
            warn,
            Some(PipelineWarning::DegenerateColumn { .. })
        ));
    }

    #[test]
    fn depolarise_identity_inside_band() {
        let col = [0.0, 0.5, 1.0, 1.5, 2.0];
        let (out, _) = depolarise(&col, 3.0, "x").unwrap();
        assert_eq!(out, col.to_vec());
    }

    #[test]
    fn depolarise_skips_masked_entries() {
        let col = [1.0, f64::NAN, 2.0, 3.0, 100.0];
        let (out, _) = depolarise(&col, 3.0, "x").unwrap();
        assert!(out[1].is_nan());
        let oracle = reference::mad_clip(&col, 3.0);
        for (a, b) in out.iter().zip(&oracle) {
            if a.is_finite() {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn depolarise_is_idempotent() {
        let col = [1.0, 2.0, 3.0, 100.0, -50.0, 2.5];
        let (once, _) = depolarise(&col, 3.0, "x").unwrap();
        let (twice, _) = depolarise(&once, 3.0, "x").unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn fill_missing_uses_industry_mean() {
        let col = [1.0, f64::NAN, 3.0];
        let ind = [0, 0, 0];
        let (out, warns) = fill_missing(&col, &ind, "x").unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
        assert!(warns.is_empty());
    }

    #[test]
    fn fill_missing_falls_back_to_grand_mean() {
        // Industry 1's only stock is missing: fall back to mean of all valid.
        let col = [1.0, 3.0, f64::NAN];
        let ind = [0, 0, 1];
        let (out, warns) = fill_missing(&col, &ind, "x").unwrap();
        assert_eq!(out[2], 2.0);
        assert_eq!(warns.len(), 1);
    }

    #[test]
    fn fill_missing_identity_on_complete() {
        let col = [1.0, 2.0, 3.0];
        let (out, _) = fill_missing(&col, &[0, 1, 0], "x").unwrap();
        assert_eq!(out, col.to_vec());
    }

    #[test]
    fn fill_all_missing_errors() {
        let col = [f64::NAN, f64::NAN];
        assert_eq!(
            fill_missing(&col, &[0, 1], "x").unwrap_err().code(),
            "AllMissing"
        );
    }

    #[test]
    fn standardize_spec_example() {
        let out = standardize(&[1.0, 2.0, 3.0], None, "x").unwrap();
        assert!((out[0] + 1.0).abs() < 1e-12);
        assert!(out[1].abs() < 1e-12);
        assert!((out[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let once = standardize(&[1.0, 2.0, 3.0, 7.0], None, "x").unwrap();
        let twice = standardize(&once, None, "x").unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_constant_errors() {
        assert_eq!(
            standardize(&[2.0, 2.0, 2.0], None, "x").unwrap_err().code(),
            "ZeroVariance"
        );
    }

    #[test]
    fn orthogonalize_collinear_target_gives_zero_residual() {
        let reg = [1.0, -1.0, 0.5, -0.5];
        let caps = [1.0, 2.0, 1.5, 0.5];
        let resid = orthogonalize(&reg, &[&reg], &caps, "x").unwrap();
        assert!(resid.iter().all(|r| r.abs() < 1e-12));
        // Re-standardization then surfaces ZeroVariance to the caller.
        assert_eq!(
            standardize(&resid, None, "x").unwrap_err().code(),
            "ZeroVariance"
        );
    }

    #[test]
    fn orthogonalize_matches_normal_equations_oracle() {
        // 50-stock random instance against the explicit (XᵀWX)⁻¹XᵀWy solve.
        let n = 50;
        let mut state = 7u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let target: Vec<f64> = (0..n).map(|_| next() * 2.0).collect();
        let r1: Vec<f64> = (0..n).map(|_| next() * 2.0).collect();
        let r2: Vec<f64> = (0..n).map(|_| next() * 2.0).collect();
        let caps: Vec<f64> = (0..n).map(|_| next().abs() * 10.0 + 0.1).collect();

        let resid = orthogonalize(&target, &[&r1, &r2], &caps, "x").unwrap();

        let mut design = Array2::zeros((n, 3));
        for i in 0..n {
            design[[i, 0]] = 1.0;
            design[[i, 1]] = r1[i];
            design[[i, 2]] = r2[i];
        }
        let beta = reference::wls_normal_equations(
            design.view(),
            ndarray::ArrayView1::from(&target),
            ndarray::ArrayView1::from(&caps),
        );
        for i in 0..n {
            let fitted = beta[0] + beta[1] * r1[i] + beta[2] * r2[i];
            assert!((resid[i] - (target[i] - fitted)).abs() < 1e-10);
        }
        // Cap-weighted covariance with each regressor vanishes.
        for reg in [&r1, &r2] {
            let wsum: f64 = caps.iter().sum();
            let mr: f64 = reg.iter().zip(&caps).map(|(x, w)| x * w).sum::<f64>() / wsum;
            let me: f64 = resid.iter().zip(&caps).map(|(x, w)| x * w).sum::<f64>() / wsum;
            let cov: f64 = (0..n)
                .map(|i| caps[i] * (resid[i] - me) * (reg[i] - mr))
                .sum::<f64>()
                / wsum;
            assert!(cov.abs() < 1e-10);
        }
    }

    fn toy_tensor() -> (ExposureTensor, Vec<f64>) {
        let stocks: Vec<StockId> = (0..6).map(|i| StockId::new(format!("S{i}"))).collect();
        let factors = vec![
            "Size".to_string(),
            "Beta".to_string(),
            "ResidualVolatility".to_string(),
            "I0".to_string(),
            "I1".to_string(),
            "CN".to_string(),
        ];
        let kinds = vec![
            FactorKind::Style,
            FactorKind::Style,
            FactorKind::Style,
            FactorKind::Industry,
            FactorKind::Industry,
            FactorKind::Country,
        ];
        let mut values = Array2::zeros((6, 6));
        let size = [0.4, -0.8, 1.3, 0.1, -0.6, 25.0]; // one outlier
        let beta = [1.1, 0.9, 0.7, f64::NAN, 1.4, 0.6]; // one missing
        let rv = [0.5, 0.2, -0.1, 0.3, -0.4, 0.8];
        for i in 0..6 {
            values[[i, 0]] = size[i];
            values[[i, 1]] = beta[i];
            values[[i, 2]] = rv[i];
            values[[i, 3]] = if i % 2 == 0 { 1.0 } else { 0.0 };
            values[[i, 4]] = if i % 2 == 0 { 0.0 } else { 1.0 };
            values[[i, 5]] = 1.0;
        }
        let date = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        let tensor = ExposureTensor::new(date, stocks, factors, kinds, values).unwrap();
        let caps = vec![3.0, 1.0, 2.0, 5.0, 1.5, 0.5];
        (tensor, caps)
    }

    #[test]
    fn pipeline_satisfies_postconditions() {
        let (tensor, caps) = toy_tensor();
        let config = PipelineConfig {
            ortho_plan: vec![(
                "ResidualVolatility".to_string(),
                vec!["Size".to_string(), "Beta".to_string()],
            )],
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&tensor, &caps, &config).unwrap();
        let v = out.tensor.values();
        let n = tensor.stocks().len();
        for j in out.tensor.indices_of(FactorKind::Style) {
            let col: Vec<f64> = v.column(j).to_vec();
            let mean = col.iter().sum::<f64>() / n as f64;
            let std = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0))
                .sqrt();
            assert!(mean.abs() < 1e-10, "column {j} mean {mean}");
            assert!((std - 1.0).abs() < 1e-10, "column {j} std {std}");
        }
        // Industry and country columns untouched.
        for j in out.tensor.indices_of(FactorKind::Industry) {
            for i in 0..n {
                assert_eq!(v[[i, j]], tensor.values()[[i, j]]);
            }
        }
        // Orthogonalized column cap-weightedly uncorrelated with regressors.
        let rv: Vec<f64> = v.column(2).to_vec();
        for j in [0usize, 1] {
            let reg: Vec<f64> = v.column(j).to_vec();
            let wsum: f64 = caps.iter().sum();
            let mr: f64 = reg.iter().zip(&caps).map(|(x, w)| x * w).sum::<f64>() / wsum;
            let me: f64 = rv.iter().zip(&caps).map(|(x, w)| x * w).sum::<f64>() / wsum;
            let cov: f64 = (0..n)
                .map(|i| caps[i] * (rv[i] - me) * (reg[i] - mr))
                .sum::<f64>()
                / wsum;
            let vr: f64 = (0..n)
                .map(|i| caps[i] * (reg[i] - mr) * (reg[i] - mr))
                .sum::<f64>()
                / wsum;
            let ve: f64 = (0..n)
                .map(|i| caps[i] * (rv[i] - me) * (rv[i] - me))
                .sum::<f64>()
                / wsum;
            assert!((cov / (vr * ve).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn pipeline_is_fixed_point_on_clean_input() {
        // Discrete orthogonal polynomials: mutually orthogonal, mean zero,
        // nothing outside the MAD band, so every step is the identity.
        let raw: [[f64; 6]; 3] = [
            [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0],
            [5.0, -1.0, -4.0, -4.0, -1.0, 5.0],
            [-5.0, 7.0, 4.0, -4.0, -7.0, 5.0],
        ];
        let stocks: Vec<StockId> = (0..6).map(|i| StockId::new(format!("S{i}"))).collect();
        let factors = vec![
            "Size".to_string(),
            "Beta".to_string(),
            "ResidualVolatility".to_string(),
            "I0".to_string(),
            "CN".to_string(),
        ];
        let kinds = vec![
            FactorKind::Style,
            FactorKind::Style,
            FactorKind::Style,
            FactorKind::Industry,
            FactorKind::Country,
        ];
        let mut values = Array2::zeros((6, 5));
        for (j, col) in raw.iter().enumerate() {
            let scored = standardize(col, None, "x").unwrap();
            for i in 0..6 {
                values[[i, j]] = scored[i];
            }
        }
        for i in 0..6 {
            values[[i, 3]] = 1.0;
            values[[i, 4]] = 1.0;
        }
        let date = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        let tensor = ExposureTensor::new(date, stocks, factors, kinds, values).unwrap();
        let caps = vec![2.0; 6]; // equal caps make cap- and equal-weighted metrics agree

        let config = PipelineConfig {
            ortho_plan: vec![(
                "ResidualVolatility".to_string(),
                vec!["Size".to_string(), "Beta".to_string()],
            )],
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&tensor, &caps, &config).unwrap();
        for (a, b) in tensor.values().iter().zip(out.tensor.values().iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_plan_runs_steps_one_to_three_only() {
        let (tensor, caps) = toy_tensor();
        let out = run_pipeline(&tensor, &caps, &PipelineConfig::default()).unwrap();
        // Beta's missing entry is filled and standardized; no NaN remains.
        assert!(out.tensor.values().iter().all(|x| x.is_finite()));
    }
}
