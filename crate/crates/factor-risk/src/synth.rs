//! Synthetic market generation with known ground truth.
//!
//! Returns follow the model exactly: r = f_c + X_i f_i + X_s f_s + u, with a
//! dominant common market component inside the country factor, industry and
//! style factors at realistic daily volatilities, and idiosyncratic
//! volatilities tied to style exposures so the structural fit has something
//! real to recover. Factor and idiosyncratic returns can carry MA(1) serial
//! correlation, and data-quality defects (missing runs, recorded-price
//! outliers, exposure gaps) can be injected to exercise the cleaning and
//! structural-adjustment machinery.
//!
//! Everything is driven by one seed: reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::panel::{
    AlphaVector, BenchmarkWeights, ExposureTensor, FactorKind, MarketCaps, ReturnsPanel, StockId,
};
use crate::store::{write_market_data, Manifest, MarketData, StoreError};

/// Hard clip keeping generated returns inside the ingestion bound.
const RETURN_CLIP: f64 = 0.9;

/// Data-quality defects injected into the recorded data. Defects model
/// measurement artifacts: they corrupt what the estimator sees, not the
/// return process itself, which is why they can be confined to a day range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DefectSpec {
    /// Fraction of stocks carrying defects.
    pub stock_fraction: f64,
    /// Missing runs per defective stock.
    pub missing_runs: usize,
    /// Run length bounds (inclusive).
    pub missing_run_len: (usize, usize),
    /// Per-day probability of a recorded outlier on a defective stock.
    pub outlier_rate: f64,
    /// Outlier magnitude in units of the stock's idiosyncratic volatility.
    pub outlier_magnitude: f64,
    /// Per-cell probability of a missing raw style exposure.
    pub exposure_missing_rate: f64,
    /// Per-cell probability of a wild raw style exposure.
    pub exposure_outlier_rate: f64,
    /// Magnitude of exposure outliers (z-score units).
    pub exposure_outlier_magnitude: f64,
    /// Day-index range (inclusive start, exclusive end) where return defects
    /// apply; the whole sample when absent.
    pub day_range: Option<(usize, usize)>,
}

impl Default for DefectSpec {
    fn default() -> Self {
        DefectSpec {
            stock_fraction: 0.1,
            missing_runs: 2,
            missing_run_len: (30, 60),
            outlier_rate: 0.02,
            outlier_magnitude: 15.0,
            exposure_missing_rate: 0.02,
            exposure_outlier_rate: 0.01,
            exposure_outlier_magnitude: 25.0,
            day_range: None,
        }
    }
}

/// Full description of a synthetic market; the seed fixes all randomness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMarketSpec {
    pub n_stocks: usize,
    pub n_style: usize,
    pub n_industries: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Daily volatility of the common market component.
    pub country_vol: f64,
    /// Daily volatility of industry-specific returns.
    pub industry_vol: f64,
    /// Daily volatility of style factor returns.
    pub style_vol: f64,
    /// Bounds on true daily idiosyncratic volatilities.
    pub idio_vol_range: (f64, f64),
    /// MA(1) coefficient of factor returns (0 = serially uncorrelated).
    pub factor_autocorr: f64,
    /// MA(1) coefficient of idiosyncratic returns.
    pub idio_autocorr: f64,
    /// Loading of the Beta style factor's return on the common market
    /// component: a stock with Beta exposure z has market sensitivity
    /// 1 + coupling·z. Applies when at least two style factors exist.
    pub beta_market_coupling: f64,
    pub defects: Option<DefectSpec>,
    pub start: NaiveDate,
}

impl Default for SyntheticMarketSpec {
    fn default() -> Self {
        SyntheticMarketSpec {
            n_stocks: 100,
            n_style: 4,
            n_industries: 6,
            n_days: 400,
            seed: 1,
            country_vol: 0.012,
            industry_vol: 0.003,
            style_vol: 0.0025,
            idio_vol_range: (0.010, 0.025),
            factor_autocorr: 0.0,
            idio_autocorr: 0.0,
            beta_market_coupling: 0.35,
            defects: None,
            start: NaiveDate::from_ymd_opt(2018, 1, 2).expect("valid date"),
        }
    }
}

impl SyntheticMarketSpec {
    fn validate(&self) {
        assert!(self.n_stocks >= 1 && self.n_style >= 1 && self.n_industries >= 1);
        assert!(self.n_days >= 2);
        assert!(self.idio_vol_range.0 > 0.0 && self.idio_vol_range.1 >= self.idio_vol_range.0);
    }

    /// Style factor names; the first few carry the conventional names so the
    /// orthogonalization plan and size-band constraints apply.
    pub fn style_names(&self) -> Vec<String> {
        let conventional = ["Size", "Beta", "ResidualVolatility", "Liquidity"];
        (0..self.n_style)
            .map(|s| {
                conventional
                    .get(s)
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| format!("Style{s:02}"))
            })
            .collect()
    }
}

/// Generator ground truth for oracle comparisons.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub factor_names: Vec<String>,
    /// Daily covariance of the (country, industries, styles) factor vector.
    pub factor_cov_daily: Array2<f64>,
    /// True daily idiosyncratic volatility per stock.
    pub idio_vols_daily: Vec<f64>,
    /// True factor-return panel, days × factors.
    pub factor_returns: Array2<f64>,
    /// Stocks carrying injected defects.
    pub defective_stocks: Vec<StockId>,
    /// Industry cap weights used in the identification constraint.
    pub industry_cap_weights: Vec<f64>,
}

/// A generated market: loadable data plus its ground truth.
pub struct SyntheticMarket {
    pub data: MarketData,
    pub truth: GroundTruth,
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date range");
    }
    out
}

/// Generate a market from a spec.
pub fn generate(spec: &SyntheticMarketSpec) -> SyntheticMarket {
    spec.validate();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let n = spec.n_stocks;
    let n_ind = spec.n_industries;
    let n_sty = spec.n_style;
    let dates = business_days(spec.start, spec.n_days);
    let stocks: Vec<StockId> = (0..n).map(|i| StockId::new(format!("S{i:04}"))).collect();

    // Industry memberships and caps.
    let industry_of: Vec<usize> = (0..n).map(|i| i % n_ind).collect();
    let caps: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = normal.sample(&mut rng);
            (0.8 * z).exp() * 1e9
        })
        .collect();
    let total_cap: f64 = caps.iter().sum();
    let industry_cap_weights: Vec<f64> = (0..n_ind)
        .map(|j| {
            (0..n)
                .filter(|&i| industry_of[i] == j)
                .map(|i| caps[i])
                .sum::<f64>()
                / total_cap
        })
        .collect();

    // Base style exposures (constant over time).
    let mut base_styles = Array2::zeros((n, n_sty));
    for i in 0..n {
        for s in 0..n_sty {
            base_styles[[i, s]] = normal.sample(&mut rng);
        }
    }

    // True idiosyncratic vols tied to style exposures.
    let (lo, hi) = spec.idio_vol_range;
    let mid = (lo * hi).sqrt();
    let slopes: Vec<f64> = (0..n_sty)
        .map(|s| match s % 3 {
            0 => 0.12,
            1 => -0.08,
            _ => 0.05,
        })
        .collect();
    let idio_vols: Vec<f64> = (0..n)
        .map(|i| {
            let mut ln = mid.ln();
            for s in 0..n_sty {
                ln += slopes[s] * base_styles[[i, s]];
            }
            ln.exp().clamp(lo, hi)
        })
        .collect();

    // Factor returns: common market + industry noise + styles, each MA(1).
    let k = 1 + n_ind + n_sty;
    let mut factor_names = vec!["CN".to_string()];
    factor_names.extend((0..n_ind).map(|j| format!("I{j:02}")));
    factor_names.extend(spec.style_names());

    let theta = spec.factor_autocorr;
    let ma_norm = (1.0 + theta * theta).sqrt();
    let raw_dim = 1 + n_ind + n_sty; // (market, industry noises, styles)
    let raw_vols: Vec<f64> = std::iter::once(spec.country_vol)
        .chain(std::iter::repeat(spec.industry_vol).take(n_ind))
        .chain(std::iter::repeat(spec.style_vol).take(n_sty))
        .collect();

    // Style 1 ("Beta") loads the common market component so that market
    // sensitivity varies across stocks; other styles are independent.
    let beta_slot = if n_sty >= 2 { Some(1usize) } else { None };
    let coupling = if beta_slot.is_some() {
        spec.beta_market_coupling
    } else {
        0.0
    };

    let mut factor_returns = Array2::zeros((spec.n_days, k));
    let mut prev_eps: Vec<f64> = (0..raw_dim).map(|_| normal.sample(&mut rng)).collect();
    for t in 0..spec.n_days {
        let eps: Vec<f64> = (0..raw_dim).map(|_| normal.sample(&mut rng)).collect();
        let g: Vec<f64> = (0..raw_dim)
            .map(|j| raw_vols[j] * (eps[j] + theta * prev_eps[j]) / ma_norm)
            .collect();
        prev_eps = eps;

        let market = g[0];
        let eta = &g[1..1 + n_ind];
        // Country return is the cap-weighted mean of raw industry returns;
        // recentred industry returns satisfy the identification constraint.
        let raw_ind: Vec<f64> = (0..n_ind).map(|j| market + eta[j]).collect();
        let f_c: f64 = raw_ind
            .iter()
            .zip(&industry_cap_weights)
            .map(|(f, w)| f * w)
            .sum();
        factor_returns[[t, 0]] = f_c;
        for j in 0..n_ind {
            factor_returns[[t, 1 + j]] = raw_ind[j] - f_c;
        }
        for s in 0..n_sty {
            let own = g[1 + n_ind + s];
            factor_returns[[t, 1 + n_ind + s]] = if Some(s) == beta_slot {
                coupling * market + own
            } else {
                own
            };
        }
    }

    // True covariance of the transformed factor vector: φ = T g with
    // g = (market, η, styles) independent.
    let mut t_map = Array2::zeros((k, raw_dim));
    t_map[[0, 0]] = 1.0;
    for j in 0..n_ind {
        t_map[[0, 1 + j]] = industry_cap_weights[j];
    }
    for i in 0..n_ind {
        t_map[[1 + i, 0]] = 0.0;
        for j in 0..n_ind {
            t_map[[1 + i, 1 + j]] = if i == j { 1.0 } else { 0.0 } - industry_cap_weights[j];
        }
    }
    for s in 0..n_sty {
        t_map[[1 + n_ind + s, 1 + n_ind + s]] = 1.0;
        if Some(s) == beta_slot {
            t_map[[1 + n_ind + s, 0]] = coupling;
        }
    }
    let sigma_g = Array2::from_diag(&Array1::from_iter(raw_vols.iter().map(|v| v * v)));
    let factor_cov_daily = t_map.dot(&sigma_g).dot(&t_map.t());

    // Idiosyncratic returns, MA(1).
    let itheta = spec.idio_autocorr;
    let ima_norm = (1.0 + itheta * itheta).sqrt();
    let mut idio_panel = Array2::zeros((spec.n_days, n));
    let mut prev_ueps: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    for t in 0..spec.n_days {
        for i in 0..n {
            let e: f64 = normal.sample(&mut rng);
            idio_panel[[t, i]] = idio_vols[i] * (e + itheta * prev_ueps[i]) / ima_norm;
            prev_ueps[i] = e;
        }
    }

    // Stock returns.
    let mut values = Array2::zeros((spec.n_days, n));
    let mut valid = Array2::from_elem((spec.n_days, n), true);
    for t in 0..spec.n_days {
        for i in 0..n {
            let mut r = factor_returns[[t, 0]] + factor_returns[[t, 1 + industry_of[i]]];
            for s in 0..n_sty {
                r += base_styles[[i, s]] * factor_returns[[t, 1 + n_ind + s]];
            }
            r += idio_panel[[t, i]];
            values[[t, i]] = r.clamp(-RETURN_CLIP, RETURN_CLIP);
        }
    }

    // Defects on recorded returns.
    let mut defective_stocks = Vec::new();
    if let Some(defects) = &spec.defects {
        let n_defective = ((defects.stock_fraction * n as f64).round() as usize).min(n);
        // Deterministic choice: seeded shuffle of indices.
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let chosen: Vec<usize> = order.into_iter().take(n_defective).collect();
        let (d_lo, d_hi) = defects.day_range.unwrap_or((0, spec.n_days));
        let d_hi = d_hi.min(spec.n_days);
        let run_len = Uniform::new_inclusive(defects.missing_run_len.0, defects.missing_run_len.1)
            .expect("run length bounds");
        for &i in &chosen {
            defective_stocks.push(stocks[i].clone());
            for _ in 0..defects.missing_runs {
                if d_hi <= d_lo {
                    break;
                }
                let start = rng.random_range(d_lo..d_hi);
                let len = run_len.sample(&mut rng);
                for t in start..(start + len).min(d_hi) {
                    valid[[t, i]] = false;
                }
            }
            for t in d_lo..d_hi {
                if valid[[t, i]] && rng.random::<f64>() < defects.outlier_rate {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let shocked = values[[t, i]] + sign * defects.outlier_magnitude * idio_vols[i];
                    values[[t, i]] = shocked.clamp(-RETURN_CLIP, RETURN_CLIP);
                }
            }
        }
        defective_stocks.sort();
    }

    let returns = ReturnsPanel::new(dates.clone(), stocks.clone(), values, valid)
        .expect("generated panel satisfies invariants");

    // Exposure tensors per date: base styles plus per-date exposure defects.
    let mut factors = Vec::with_capacity(k);
    let mut kinds = Vec::with_capacity(k);
    for s in spec.style_names() {
        factors.push(s);
        kinds.push(FactorKind::Style);
    }
    for j in 0..n_ind {
        factors.push(format!("I{j:02}"));
        kinds.push(FactorKind::Industry);
    }
    factors.push("CN".to_string());
    kinds.push(FactorKind::Country);

    let mut exposures = BTreeMap::new();
    let mut caps_by_date = BTreeMap::new();
    let caps_map: BTreeMap<StockId, f64> =
        stocks.iter().cloned().zip(caps.iter().copied()).collect();
    let caps_table = MarketCaps::new(caps_map).expect("positive caps");
    for (_t, &date) in dates.iter().enumerate() {
        let mut m = Array2::zeros((n, k));
        for i in 0..n {
            for s in 0..n_sty {
                let mut x = base_styles[[i, s]];
                if let Some(defects) = &spec.defects {
                    if rng.random::<f64>() < defects.exposure_missing_rate {
                        x = f64::NAN;
                    } else if rng.random::<f64>() < defects.exposure_outlier_rate {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        x += sign * defects.exposure_outlier_magnitude;
                    }
                }
                m[[i, s]] = x;
            }
            m[[i, n_sty + industry_of[i]]] = 1.0;
            m[[i, k - 1]] = 1.0;
        }
        let tensor = ExposureTensor::new(date, stocks.clone(), factors.clone(), kinds.clone(), m)
            .expect("generated tensor satisfies invariants");
        exposures.insert(date, tensor);
        caps_by_date.insert(date, caps_table.clone());
    }

    // Benchmark: cap weights. Alpha: static standardized noise signal.
    let bench_map: BTreeMap<StockId, f64> = stocks
        .iter()
        .cloned()
        .zip(caps.iter().map(|c| c / total_cap))
        .collect();
    let benchmark = BenchmarkWeights::new(bench_map).expect("cap weights sum to one");
    let alpha_map: BTreeMap<StockId, f64> = stocks
        .iter()
        .cloned()
        .map(|s| {
            let a = 0.02 * normal.sample(&mut rng);
            (s, a)
        })
        .collect();
    let alpha = AlphaVector::new(alpha_map).expect("finite alphas");

    // Ground-truth factor ordering must match the tensor column order
    // (styles, industries, country).
    let mut truth_names = Vec::with_capacity(k);
    let mut perm = Vec::with_capacity(k);
    for s in 0..n_sty {
        truth_names.push(factors[s].clone());
        perm.push(1 + n_ind + s);
    }
    for j in 0..n_ind {
        truth_names.push(format!("I{j:02}"));
        perm.push(1 + j);
    }
    truth_names.push("CN".to_string());
    perm.push(0);

    let mut cov_perm = Array2::zeros((k, k));
    for (a, &pa) in perm.iter().enumerate() {
        for (b, &pb) in perm.iter().enumerate() {
            cov_perm[[a, b]] = factor_cov_daily[[pa, pb]];
        }
    }
    let mut returns_perm = Array2::zeros((spec.n_days, k));
    for t in 0..spec.n_days {
        for (a, &pa) in perm.iter().enumerate() {
            returns_perm[[t, a]] = factor_returns[[t, pa]];
        }
    }

    SyntheticMarket {
        data: MarketData {
            returns,
            exposures,
            caps: caps_by_date,
            benchmark: Some(benchmark),
            alpha: Some(alpha),
        },
        truth: GroundTruth {
            factor_names: truth_names,
            factor_cov_daily: cov_perm,
            idio_vols_daily: idio_vols,
            factor_returns: returns_perm,
            defective_stocks,
            industry_cap_weights,
        },
    }
}

/// Generate and persist a market directory, including ground truth and a
/// manifest carrying the full spec.
pub fn write_synthetic(dir: &Path, spec: &SyntheticMarketSpec) -> Result<(), StoreError> {
    let market = generate(spec);
    write_market_data(dir, &market.data)?;

    let truth_dir = dir.join("truth");
    std::fs::create_dir_all(&truth_dir).map_err(|source| StoreError::Io {
        path: truth_dir.display().to_string(),
        source,
    })?;
    let est = crate::covariance::CovarianceEstimate {
        factors: market.truth.factor_names.clone(),
        matrix: market.truth.factor_cov_daily.clone(),
        stage: crate::covariance::CovarianceStage::Raw,
        date: spec.start,
    };
    crate::store::write_covariance(&truth_dir.join("factor_cov_daily.csv"), &est)?;
    crate::store::write_dated_matrix(
        &truth_dir.join("factor_returns.csv"),
        market.data.returns.dates(),
        &market.truth.factor_names,
        &market.truth.factor_returns,
    )?;
    let mut vols = String::from("stock,vol\n");
    for (s, v) in market
        .data
        .returns
        .stocks()
        .iter()
        .zip(&market.truth.idio_vols_daily)
    {
        vols.push_str(&format!("{s},{}\n", crate::panel::fmt_f64(*v)));
    }
    std::fs::write(truth_dir.join("idio_vols.csv"), vols).map_err(|source| StoreError::Io {
        path: truth_dir.display().to_string(),
        source,
    })?;
    let mut defective = String::from("stock\n");
    for s in &market.truth.defective_stocks {
        defective.push_str(&format!("{s}\n"));
    }
    std::fs::write(truth_dir.join("defective.csv"), defective).map_err(|source| {
        StoreError::Io {
            path: truth_dir.display().to_string(),
            source,
        }
    })?;

    let manifest = Manifest::new(
        "synth",
        serde_json::to_value(spec).expect("serializable spec"),
    )
    .with_universe(market.data.returns.stocks())
    .with_dates(
        market.data.returns.dates()[0],
        *market.data.returns.dates().last().expect("nonempty"),
    );
    manifest.write(&dir.join("manifest.json"))
}
