//! Per-date factor-return estimation by constrained cross-sectional
//! weighted least squares.
//!
//! The country factor is collinear with the industry block (every stock
//! loads 1 on the country and on exactly one industry), so the regression
//! runs without the country column and recovers it in a second step: the
//! country return is the cap-weighted mean of the raw industry returns,
//! which are then recentred so the cap-weighted industry returns sum to
//! zero. Fitted values and residuals are unchanged by the
//! reparameterization, and the result coincides with the equality-
//! constrained solve.

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{weighted_least_squares, PivotedQr, RANK_TOL};
use crate::panel::{ExposureTensor, FactorKind, StockId};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("design matrix is rank deficient at {date} (rank {rank} < {columns})")]
    RankDeficient {
        date: NaiveDate,
        rank: usize,
        columns: usize,
    },

    #[error("underdetermined cross-section at {date}: {stocks} stocks for {columns} columns")]
    Underdetermined {
        date: NaiveDate,
        stocks: usize,
        columns: usize,
    },

    #[error("cross-section at {date} has no stocks")]
    EmptyCrossSection { date: NaiveDate },
}

impl RegressionError {
    pub fn code(&self) -> &'static str {
        match self {
            RegressionError::RankDeficient { .. } => "RankDeficient",
            RegressionError::Underdetermined { .. } => "Underdetermined",
            RegressionError::EmptyCrossSection { .. } => "EmptyCrossSection",
        }
    }
}

/// Weighting scheme for the cross-sectional regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionWeighting {
    Equal,
    Cap,
    /// Square root of market cap, the convention used throughout this crate.
    #[default]
    SqrtCap,
}

/// Per-stock regression weights, normalized to sum to one.
pub fn regression_weights(caps: &[f64], weighting: RegressionWeighting) -> Vec<f64> {
    let raw: Vec<f64> = caps
        .iter()
        .map(|&c| match weighting {
            RegressionWeighting::Equal => 1.0,
            RegressionWeighting::Cap => c,
            RegressionWeighting::SqrtCap => c.sqrt(),
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Unconstrained weighted least squares of returns on a design matrix
/// (industries and styles, no country column). Returns coefficients and
/// residuals; residuals are weight-orthogonal to every design column.
pub fn solve_unconstrained(
    design: &Array2<f64>,
    returns: &[f64],
    weights: &[f64],
    date: NaiveDate,
) -> Result<(Array1<f64>, Array1<f64>), RegressionError> {
    let (n, k) = design.dim();
    if n == 0 {
        return Err(RegressionError::EmptyCrossSection { date });
    }
    // Exactly determined (saturated) systems are allowed: f = r, u = 0.
    if n < k {
        return Err(RegressionError::Underdetermined {
            date,
            stocks: n,
            columns: k,
        });
    }
    let y = Array1::from_iter(returns.iter().copied());
    let w = Array1::from_iter(weights.iter().copied());

    let mut scaled = design.clone();
    for i in 0..n {
        let s = w[i].max(0.0).sqrt();
        for j in 0..k {
            scaled[[i, j]] *= s;
        }
    }
    let qr = PivotedQr::decompose(scaled.view(), RANK_TOL);
    if qr.rank() < k {
        return Err(RegressionError::RankDeficient {
            date,
            rank: qr.rank(),
            columns: k,
        });
    }

    let (beta, _) = weighted_least_squares(design.view(), y.view(), w.view());
    let fitted = design.dot(&beta);
    let resid = &y - &fitted;
    Ok((beta, resid))
}

/// Two-step country-factor recovery: the country return is the cap-weighted
/// mean of the raw industry returns and is subtracted from each of them, so
/// the cap-weighted recentred industry returns sum to zero.
pub fn recover_country(
    raw_industry_returns: &[f64],
    industry_cap_weights: &[f64],
) -> (f64, Vec<f64>) {
    debug_assert_eq!(raw_industry_returns.len(), industry_cap_weights.len());
    let f_c: f64 = raw_industry_returns
        .iter()
        .zip(industry_cap_weights)
        .map(|(f, w)| f * w)
        .sum();
    let constrained = raw_industry_returns.iter().map(|f| f - f_c).collect();
    (f_c, constrained)
}

/// One date's regression output.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub date: NaiveDate,
    /// Factor returns aligned to the tensor's factor order; NaN marks an
    /// industry dropped for having no members that date.
    pub factor_returns: Vec<f64>,
    /// Residual (idiosyncratic) returns per universe stock.
    pub idio: Vec<f64>,
    pub universe: Vec<StockId>,
    /// Weighted R² of the cross-sectional fit.
    pub r2: f64,
    pub dropped_industries: Vec<String>,
}

/// Run the constrained cross-sectional regression for one date.
///
/// `tensor` must already be restricted to the regression universe (stocks
/// with a valid return and data in every source) and carry processed style
/// exposures; `returns` and `caps` align with its stock order.
pub fn run_cross_section(
    tensor: &ExposureTensor,
    returns: &[f64],
    caps: &[f64],
    weighting: RegressionWeighting,
) -> Result<CrossSection, RegressionError> {
    let n = tensor.stocks().len();
    assert_eq!(returns.len(), n);
    assert_eq!(caps.len(), n);
    let date = tensor.date();
    if n == 0 {
        return Err(RegressionError::EmptyCrossSection { date });
    }

    let weights = regression_weights(caps, weighting);
    let industry_cols: Vec<usize> = tensor.indices_of(FactorKind::Industry).collect();
    let style_cols: Vec<usize> = tensor.indices_of(FactorKind::Style).collect();
    let values = tensor.values();

    // Industries with no members this date are dropped from the design;
    // their factor return is reported missing.
    let mut live_industries = Vec::new();
    let mut dropped_industries = Vec::new();
    for &j in &industry_cols {
        let members = (0..n).filter(|&i| values[[i, j]] == 1.0).count();
        if members > 0 {
            live_industries.push(j);
        } else {
            dropped_industries.push(tensor.factors()[j].clone());
        }
    }

    let k = live_industries.len() + style_cols.len();
    let mut design = Array2::zeros((n, k));
    for (col, &j) in live_industries.iter().chain(style_cols.iter()).enumerate() {
        for i in 0..n {
            design[[i, col]] = values[[i, j]];
        }
    }

    let (beta, resid) = solve_unconstrained(&design, returns, &weights, date)?;

    // Industry cap weights over the regression universe.
    let total_cap: f64 = caps.iter().sum();
    let industry_cap_weight: Vec<f64> = live_industries
        .iter()
        .map(|&j| {
            (0..n)
                .filter(|&i| values[[i, j]] == 1.0)
                .map(|i| caps[i])
                .sum::<f64>()
                / total_cap
        })
        .collect();

    let raw_industry: Vec<f64> = (0..live_industries.len()).map(|c| beta[c]).collect();
    let (f_c, constrained_industry) = recover_country(&raw_industry, &industry_cap_weight);

    let mut factor_returns = vec![f64::NAN; tensor.factors().len()];
    factor_returns[tensor.country_index()] = f_c;
    for (c, &j) in live_industries.iter().enumerate() {
        factor_returns[j] = constrained_industry[c];
    }
    for (c, &j) in style_cols.iter().enumerate() {
        factor_returns[j] = beta[live_industries.len() + c];
    }

    // Weighted R² against the weighted mean.
    let wsum: f64 = weights.iter().sum();
    let mean_w: f64 = returns
        .iter()
        .zip(&weights)
        .map(|(r, w)| r * w)
        .sum::<f64>()
        / wsum;
    let tss: f64 = returns
        .iter()
        .zip(&weights)
        .map(|(r, w)| w * (r - mean_w) * (r - mean_w))
        .sum();
    let rss: f64 = resid.iter().zip(&weights).map(|(u, w)| w * u * u).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    Ok(CrossSection {
        date,
        factor_returns,
        idio: resid.to_vec(),
        universe: tensor.stocks().to_vec(),
        r2,
        dropped_industries,
    })
}

/// Dates × factors matrix of estimated factor returns with per-date R².
/// Missing entries (dropped industries) are NaN.
#[derive(Debug, Clone)]
pub struct FactorReturnSeries {
    dates: Vec<NaiveDate>,
    factors: Vec<String>,
    kinds: Vec<FactorKind>,
    values: Array2<f64>,
    r2: Vec<f64>,
}

impl FactorReturnSeries {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn kinds(&self) -> &[FactorKind] {
        &self.kinds
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn r2(&self) -> &[f64] {
        &self.r2
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Rows up to and including `end` (a date index), as a view.
    pub fn window(&self, end: usize, len: usize) -> ndarray::ArrayView2<'_, f64> {
        let start = (end + 1).saturating_sub(len);
        self.values.slice(ndarray::s![start..=end, ..])
    }
}

/// Dates × stocks panel of regression residuals with validity mask.
#[derive(Debug, Clone)]
pub struct IdioReturnPanel {
    dates: Vec<NaiveDate>,
    stocks: Vec<StockId>,
    values: Array2<f64>,
    valid: Array2<bool>,
}

impl IdioReturnPanel {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn stocks(&self) -> &[StockId] {
        &self.stocks
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn valid(&self) -> &Array2<bool> {
        &self.valid
    }

    pub fn get(&self, t: usize, n: usize) -> Option<f64> {
        if self.valid[[t, n]] {
            Some(self.values[[t, n]])
        } else {
            None
        }
    }

    /// Column of one stock over a trailing window ending at `end` inclusive,
    /// NaN where missing.
    pub fn stock_window(&self, stock: usize, end: usize, len: usize) -> Vec<f64> {
        let start = (end + 1).saturating_sub(len);
        (start..=end)
            .map(|t| {
                if self.valid[[t, stock]] {
                    self.values[[t, stock]]
                } else {
                    f64::NAN
                }
            })
            .collect()
    }
}

/// Assemble per-date cross-sections (in date order) into a factor-return
/// series and an idio panel over a fixed stock list.
pub fn assemble_series(
    sections: &[CrossSection],
    factors: &[String],
    kinds: &[FactorKind],
    stocks: &[StockId],
) -> (FactorReturnSeries, IdioReturnPanel) {
    let t_len = sections.len();
    let mut values = Array2::from_elem((t_len, factors.len()), f64::NAN);
    let mut r2 = Vec::with_capacity(t_len);
    let mut idio = Array2::from_elem((t_len, stocks.len()), f64::NAN);
    let mut valid = Array2::from_elem((t_len, stocks.len()), false);
    let stock_pos: std::collections::BTreeMap<&StockId, usize> =
        stocks.iter().enumerate().map(|(i, s)| (s, i)).collect();

    let mut dates = Vec::with_capacity(t_len);
    for (t, cs) in sections.iter().enumerate() {
        dates.push(cs.date);
        assert_eq!(cs.factor_returns.len(), factors.len());
        for (j, v) in cs.factor_returns.iter().enumerate() {
            values[[t, j]] = *v;
        }
        r2.push(cs.r2);
        for (i, s) in cs.universe.iter().enumerate() {
            if let Some(&p) = stock_pos.get(s) {
                idio[[t, p]] = cs.idio[i];
                valid[[t, p]] = true;
            }
        }
    }

    (
        FactorReturnSeries {
            dates: dates.clone(),
            factors: factors.to_vec(),
            kinds: kinds.to_vec(),
            values,
            r2,
        },
        IdioReturnPanel {
            dates,
            stocks: stocks.to_vec(),
            values: idio,
            valid,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use ndarray::array;

    fn d() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 4).unwrap()
    }

    #[test]
    fn weights_sqrt_cap_example() {
        let w = regression_weights(&[1.0, 4.0, 9.0], RegressionWeighting::SqrtCap);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[1] - 2.0 / 6.0).abs() < 1e-15);
        assert!((w[2] - 3.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn weights_equal_caps_and_single_stock() {
        let w = regression_weights(&[5.0, 5.0], RegressionWeighting::SqrtCap);
        assert_eq!(w, vec![0.5, 0.5]);
        assert_eq!(
            regression_weights(&[3.0], RegressionWeighting::SqrtCap),
            vec![1.0]
        );
    }

    #[test]
    fn unconstrained_intercept_only_is_weighted_mean() {
        let design = array![[1.0], [1.0], [1.0]];
        let r = [0.01, 0.02, 0.03];
        let w = [1.0 / 3.0; 3];
        let (beta, resid) = solve_unconstrained(&design, &r, &w, d()).unwrap();
        assert!((beta[0] - 0.02).abs() < 1e-14);
        for (u, x) in resid.iter().zip(&r) {
            assert!((u - (x - 0.02)).abs() < 1e-14);
        }
    }

    #[test]
    fn unconstrained_saturated_system_is_exact() {
        // Identity design on 3 stocks: f = r, u = 0.
        let design = Array2::eye(3);
        let r = [0.01, 0.02, 0.03];
        let w = [1.0 / 3.0; 3];
        let (beta, resid) = solve_unconstrained(&design, &r, &w, d()).unwrap();
        for i in 0..3 {
            assert!((beta[i] - r[i]).abs() < 1e-14);
            assert!(resid[i].abs() < 1e-14);
        }
    }

    #[test]
    fn unconstrained_underdetermined_errors() {
        let design = Array2::ones((2, 3));
        let r = [0.01, 0.02];
        let w = [0.5; 2];
        let err = solve_unconstrained(&design, &r, &w, d()).unwrap_err();
        assert_eq!(err.code(), "Underdetermined");
    }

    #[test]
    fn unconstrained_matches_normal_equations_oracle() {
        let n = 100;
        let k = 5;
        let mut state = 99u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut design = Array2::zeros((n, k));
        for i in 0..n {
            for j in 0..k {
                design[[i, j]] = next() * 2.0;
            }
        }
        let returns: Vec<f64> = (0..n).map(|_| next() * 0.05).collect();
        let caps: Vec<f64> = (0..n).map(|_| next().abs() * 10.0 + 0.5).collect();
        let weights = regression_weights(&caps, RegressionWeighting::SqrtCap);

        let (beta, resid) = solve_unconstrained(&design, &returns, &weights, d()).unwrap();
        let oracle = reference::wls_normal_equations(
            design.view(),
            ndarray::ArrayView1::from(&returns),
            ndarray::ArrayView1::from(&weights),
        );
        for j in 0..k {
            assert!((beta[j] - oracle[j]).abs() < 1e-8);
        }
        // Residuals weight-orthogonal to every column.
        for j in 0..k {
            let dot: f64 = (0..n).map(|i| weights[i] * resid[i] * design[[i, j]]).sum();
            assert!(dot.abs() < 1e-10);
        }
    }

    #[test]
    fn recover_country_uniform() {
        let (fc, fi) = recover_country(&[0.01, 0.01], &[0.5, 0.5]);
        assert!((fc - 0.01).abs() < 1e-15);
        assert!(fi.iter().all(|f| f.abs() < 1e-15));
    }

    #[test]
    fn recover_country_hand_example() {
        let (fc, fi) = recover_country(&[0.02, -0.01], &[0.75, 0.25]);
        assert!((fc - 0.0125).abs() < 1e-15);
        assert!((fi[0] - 0.0075).abs() < 1e-15);
        assert!((fi[1] + 0.0225).abs() < 1e-15);
        let constraint: f64 = fi.iter().zip(&[0.75, 0.25]).map(|(f, w)| f * w).sum();
        assert!(constraint.abs() < 1e-15);
    }

    #[test]
    fn recover_country_single_industry() {
        let (fc, fi) = recover_country(&[0.03], &[1.0]);
        assert_eq!(fc, 0.03);
        assert_eq!(fi, vec![0.0]);
    }

    fn small_tensor(
        n: usize,
        n_ind: usize,
        n_style: usize,
        seed: u64,
    ) -> (ExposureTensor, Vec<f64>) {
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let stocks: Vec<StockId> = (0..n).map(|i| StockId::new(format!("S{i:03}"))).collect();
        let mut factors = vec!["CN".to_string()];
        let mut kinds = vec![FactorKind::Country];
        for i in 0..n_ind {
            factors.push(format!("I{i}"));
            kinds.push(FactorKind::Industry);
        }
        for s in 0..n_style {
            factors.push(format!("Y{s}"));
            kinds.push(FactorKind::Style);
        }
        let mut values = Array2::zeros((n, factors.len()));
        for i in 0..n {
            values[[i, 0]] = 1.0;
            values[[i, 1 + i % n_ind]] = 1.0;
            for s in 0..n_style {
                values[[i, 1 + n_ind + s]] = next() * 2.0;
            }
        }
        let caps: Vec<f64> = (0..n).map(|_| next().abs() * 20.0 + 1.0).collect();
        (
            ExposureTensor::new(d(), stocks, factors, kinds, values).unwrap(),
            caps,
        )
    }

    #[test]
    fn cross_section_recovers_synthetic_factor_returns() {
        let (tensor, caps) = small_tensor(60, 4, 3, 11);
        // True factor returns satisfying the cap-weighted constraint.
        let total: f64 = caps.iter().sum();
        let values = tensor.values();
        let ind_w: Vec<f64> = (1..5)
            .map(|j| {
                (0..60)
                    .filter(|&i| values[[i, j]] == 1.0)
                    .map(|i| caps[i])
                    .sum::<f64>()
                    / total
            })
            .collect();
        let raw_ind = [0.012, -0.004, 0.007, -0.009];
        let (fc_true, fi_true) = recover_country(&raw_ind, &ind_w);
        let fs_true = [0.003, -0.002, 0.001];
        let returns: Vec<f64> = (0..60)
            .map(|i| {
                let mut r = fc_true;
                for (c, fi) in fi_true.iter().enumerate() {
                    r += values[[i, 1 + c]] * fi;
                }
                for (s, fs) in fs_true.iter().enumerate() {
                    r += values[[i, 5 + s]] * fs;
                }
                r
            })
            .collect();

        let cs = run_cross_section(&tensor, &returns, &caps, RegressionWeighting::SqrtCap).unwrap();
        assert!((cs.factor_returns[0] - fc_true).abs() < 1e-8);
        for c in 0..4 {
            assert!((cs.factor_returns[1 + c] - fi_true[c]).abs() < 1e-8);
        }
        for s in 0..3 {
            assert!((cs.factor_returns[5 + s] - fs_true[s]).abs() < 1e-8);
        }
        assert!(cs.idio.iter().all(|u| u.abs() < 1e-8));
        assert!((cs.r2 - 1.0).abs() < 1e-8);
        // Constraint holds.
        let cons: f64 = (0..4).map(|c| ind_w[c] * cs.factor_returns[1 + c]).sum();
        assert!(cons.abs() < 1e-12);
    }

    #[test]
    fn cross_section_constant_market_absorbed_by_country() {
        let (tensor, caps) = small_tensor(30, 3, 0, 5);
        let returns = vec![0.015; 30];
        let cs = run_cross_section(&tensor, &returns, &caps, RegressionWeighting::SqrtCap).unwrap();
        assert!((cs.factor_returns[0] - 0.015).abs() < 1e-10);
        for c in 0..3 {
            assert!(cs.factor_returns[1 + c].abs() < 1e-10);
        }
    }

    #[test]
    fn two_step_matches_constrained_kkt_oracle() {
        for seed in 0..8u64 {
            let (tensor, caps) = small_tensor(18, 3, 2, 100 + seed);
            let mut state = 777 + seed;
            let mut next = || {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let returns: Vec<f64> = (0..18).map(|_| next() * 0.06).collect();
            let weights = regression_weights(&caps, RegressionWeighting::SqrtCap);
            let cs =
                run_cross_section(&tensor, &returns, &caps, RegressionWeighting::SqrtCap).unwrap();

            // Oracle: full design including the country column, with the
            // cap-weighted industry constraint row.
            let values = tensor.values();
            let total: f64 = caps.iter().sum();
            let mut constraint = Array1::zeros(6);
            for c in 0..3 {
                constraint[1 + c] = (0..18)
                    .filter(|&i| values[[i, 1 + c]] == 1.0)
                    .map(|i| caps[i])
                    .sum::<f64>()
                    / total;
            }
            let oracle = reference::constrained_wls_kkt(
                values.view(),
                ndarray::ArrayView1::from(&returns),
                ndarray::ArrayView1::from(&weights),
                constraint.view(),
            );
            for j in 0..6 {
                assert!(
                    (cs.factor_returns[j] - oracle[j]).abs() < 1e-8,
                    "factor {j}: {} vs oracle {}",
                    cs.factor_returns[j],
                    oracle[j]
                );
            }
        }
    }

    #[test]
    fn cap_scaling_leaves_factor_returns_unchanged() {
        let (tensor, caps) = small_tensor(40, 4, 2, 3);
        let mut state = 31u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let returns: Vec<f64> = (0..40).map(|_| next() * 0.04).collect();
        let scaled: Vec<f64> = caps.iter().map(|c| c * 37.5).collect();
        let a = run_cross_section(&tensor, &returns, &caps, RegressionWeighting::SqrtCap).unwrap();
        let b =
            run_cross_section(&tensor, &returns, &scaled, RegressionWeighting::SqrtCap).unwrap();
        for (x, y) in a.factor_returns.iter().zip(&b.factor_returns) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_identity_holds() {
        let (tensor, caps) = small_tensor(50, 5, 3, 77);
        let mut state = 13u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let returns: Vec<f64> = (0..50).map(|_| next() * 0.05).collect();
        let cs = run_cross_section(&tensor, &returns, &caps, RegressionWeighting::SqrtCap).unwrap();
        let values = tensor.values();
        for i in 0..50 {
            let mut fitted = 0.0;
            for j in 0..values.ncols() {
                let f = cs.factor_returns[j];
                if f.is_finite() {
                    fitted += values[[i, j]] * f;
                }
            }
            assert!((returns[i] - fitted - cs.idio[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_industry_dropped_and_reported() {
        let (tensor, caps) = small_tensor(20, 4, 1, 42);
        // Remove all members of industry 3 by reassigning them to industry 0.
        let mut values = tensor.values().clone();
        for i in 0..20 {
            if values[[i, 4]] == 1.0 {
                values[[i, 4]] = 0.0;
                values[[i, 1]] = 1.0;
            }
        }
        let tensor = tensor.with_values(values);
        let mut state = 8u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let returns: Vec<f64> = (0..20).map(|_| next() * 0.05).collect();
        let cs = run_cross_section(&tensor, &returns, &caps, RegressionWeighting::SqrtCap).unwrap();
        assert_eq!(cs.dropped_industries, vec!["I3".to_string()]);
        assert!(cs.factor_returns[4].is_nan());
    }
}
