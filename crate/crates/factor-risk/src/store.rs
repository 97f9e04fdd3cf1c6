//! Experiment-directory conventions: loading raw market data and persisting
//! derived artifacts with JSON manifests.
//!
//! One directory is one experiment:
//!
//! ```text
//! data/
//!   returns.csv              date,STOCK1,STOCK2,...
//!   exposures/<date>.csv     stock,style:...,ind:...,country:...
//!   caps/<date>.csv          stock,cap
//!   benchmark.csv            stock,weight      (optional, static)
//!   alpha.csv                stock,alpha       (optional, static)
//!   truth/                   generator ground truth (synthetic data only)
//!   manifest.json
//! ```
//!
//! Derived artifacts are CSV matrices plus a manifest recording every
//! parameter, so any output is reproducible from the manifest alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::CovarianceEstimate;
use crate::idio::IdioVarianceVector;
use crate::panel::{
    fmt_f64, AlphaVector, BenchmarkWeights, ExposureTensor, MarketCaps, PanelError, ReturnsPanel,
    StockId,
};
use crate::regression::{FactorReturnSeries, IdioReturnPanel};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Panel(#[from] PanelError),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Panel(e) => e.code(),
            StoreError::Io { .. } => "Io",
            StoreError::MissingInput(_) => "MissingInput",
            StoreError::Inconsistent(_) => "Inconsistent",
            StoreError::Json { .. } => "Json",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Raw inputs of one experiment, aligned by nothing yet: alignment happens
/// per estimation date downstream.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub returns: ReturnsPanel,
    pub exposures: BTreeMap<NaiveDate, ExposureTensor>,
    pub caps: BTreeMap<NaiveDate, MarketCaps>,
    pub benchmark: Option<BenchmarkWeights>,
    pub alpha: Option<AlphaVector>,
}

impl MarketData {
    /// Factor names/kinds shared by every exposure tensor.
    pub fn factors(&self) -> (&[String], &[crate::panel::FactorKind]) {
        let t = self.exposures.values().next().expect("validated non-empty");
        (t.factors(), t.kinds())
    }
}

/// Load an experiment directory.
pub fn load_market_data(dir: &Path) -> Result<MarketData, StoreError> {
    let returns_path = dir.join("returns.csv");
    if !returns_path.exists() {
        return Err(StoreError::MissingInput(returns_path.display().to_string()));
    }
    let returns = ReturnsPanel::ingest(&returns_path)?;

    let mut exposures = BTreeMap::new();
    let exp_dir = dir.join("exposures");
    if !exp_dir.is_dir() {
        return Err(StoreError::MissingInput(exp_dir.display().to_string()));
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(&exp_dir)
        .map_err(io_err(&exp_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let date = NaiveDate::parse_from_str(stem, "%Y-%m-%d").map_err(|e| {
            StoreError::Inconsistent(format!("exposure file {stem:?} is not a date: {e}"))
        })?;
        exposures.insert(date, ExposureTensor::ingest(&path, date)?);
    }
    if exposures.is_empty() {
        return Err(StoreError::MissingInput(format!(
            "{} contains no exposure files",
            exp_dir.display()
        )));
    }
    // Factor layout must be identical across dates.
    {
        let mut iter = exposures.values();
        let first = iter.next().expect("non-empty");
        for t in iter {
            if t.factors() != first.factors() || t.kinds() != first.kinds() {
                return Err(StoreError::Inconsistent(format!(
                    "exposure factor columns change at {}",
                    t.date()
                )));
            }
        }
    }

    let mut caps = BTreeMap::new();
    let caps_dir = dir.join("caps");
    if !caps_dir.is_dir() {
        return Err(StoreError::MissingInput(caps_dir.display().to_string()));
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(&caps_dir)
        .map_err(io_err(&caps_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let date = NaiveDate::parse_from_str(stem, "%Y-%m-%d").map_err(|e| {
            StoreError::Inconsistent(format!("caps file {stem:?} is not a date: {e}"))
        })?;
        caps.insert(date, MarketCaps::ingest(&path)?);
    }

    let benchmark_path = dir.join("benchmark.csv");
    let benchmark = if benchmark_path.exists() {
        Some(BenchmarkWeights::ingest(&benchmark_path)?)
    } else {
        None
    };
    let alpha_path = dir.join("alpha.csv");
    let alpha = if alpha_path.exists() {
        Some(AlphaVector::ingest(&alpha_path)?)
    } else {
        None
    };

    Ok(MarketData {
        returns,
        exposures,
        caps,
        benchmark,
        alpha,
    })
}

/// Write a full experiment directory (used by the synthetic generator).
pub fn write_market_data(dir: &Path, data: &MarketData) -> Result<(), StoreError> {
    fs::create_dir_all(dir.join("exposures")).map_err(io_err(dir))?;
    fs::create_dir_all(dir.join("caps")).map_err(io_err(dir))?;
    data.returns.write(&dir.join("returns.csv"))?;
    for (date, tensor) in &data.exposures {
        tensor.write(&dir.join("exposures").join(format!("{date}.csv")))?;
    }
    for (date, caps) in &data.caps {
        caps.write(&dir.join("caps").join(format!("{date}.csv")))?;
    }
    if let Some(b) = &data.benchmark {
        b.write(&dir.join("benchmark.csv"))?;
    }
    if let Some(a) = &data.alpha {
        a.write(&dir.join("alpha.csv"))?;
    }
    Ok(())
}

/// Run manifest: command, parameters, and data fingerprint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub params: serde_json::Value,
    pub universe_hash: String,
    pub dates: Option<(NaiveDate, NaiveDate)>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, params: serde_json::Value) -> Self {
        Manifest {
            command: command.to_string(),
            params,
            universe_hash: String::new(),
            dates: None,
            notes: Vec::new(),
        }
    }

    pub fn with_universe(mut self, stocks: &[StockId]) -> Self {
        self.universe_hash = universe_hash(stocks);
        self
    }

    pub fn with_dates(mut self, start: NaiveDate, end: NaiveDate) -> Self {
        self.dates = Some((start, end));
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(self).map_err(|source| StoreError::Json {
            path: path.display().to_string(),
            source,
        })?;
        fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| StoreError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// FNV-1a over the ordered stock ids; stable across runs and platforms.
pub fn universe_hash(stocks: &[StockId]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for s in stocks {
        for b in s.as_str().as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash ^= 0x1f;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Write a dates × columns matrix as CSV with empty cells for NaN.
pub fn write_dated_matrix(
    path: &Path,
    dates: &[NaiveDate],
    columns: &[String],
    values: &Array2<f64>,
) -> Result<(), StoreError> {
    let mut out = String::from("date");
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (t, d) in dates.iter().enumerate() {
        out.push_str(&d.format("%Y-%m-%d").to_string());
        for j in 0..columns.len() {
            out.push(',');
            let v = values[[t, j]];
            if v.is_finite() {
                out.push_str(&fmt_f64(v));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Read a dates × columns CSV written by [`write_dated_matrix`].
pub fn read_dated_matrix(
    path: &Path,
) -> Result<(Vec<NaiveDate>, Vec<String>, Array2<f64>), StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| StoreError::Inconsistent(format!("{} is empty", path.display())))?;
    let columns: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let date = NaiveDate::parse_from_str(cells.next().unwrap_or_default(), "%Y-%m-%d")
            .map_err(|e| {
                StoreError::Inconsistent(format!("bad date in {}: {e}", path.display()))
            })?;
        dates.push(date);
        let row: Vec<f64> = cells
            .map(|c| {
                if c.trim().is_empty() {
                    f64::NAN
                } else {
                    c.trim().parse().unwrap_or(f64::NAN)
                }
            })
            .collect();
        rows.push(row);
    }
    let mut values = Array2::from_elem((dates.len(), columns.len()), f64::NAN);
    for (t, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            values[[t, j]] = *v;
        }
    }
    Ok((dates, columns, values))
}

pub fn write_factor_returns(path: &Path, series: &FactorReturnSeries) -> Result<(), StoreError> {
    write_dated_matrix(path, series.dates(), series.factors(), series.values())
}

pub fn write_idio_returns(path: &Path, panel: &IdioReturnPanel) -> Result<(), StoreError> {
    let columns: Vec<String> = panel.stocks().iter().map(|s| s.to_string()).collect();
    let mut masked = panel.values().clone();
    for t in 0..masked.nrows() {
        for n in 0..masked.ncols() {
            if !panel.valid()[[t, n]] {
                masked[[t, n]] = f64::NAN;
            }
        }
    }
    write_dated_matrix(path, panel.dates(), &columns, &masked)
}

/// Covariance CSV: factor names as header, one labelled row per factor.
pub fn write_covariance(path: &Path, est: &CovarianceEstimate) -> Result<(), StoreError> {
    let mut out = String::from("factor");
    for f in &est.factors {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for (i, f) in est.factors.iter().enumerate() {
        out.push_str(f);
        for j in 0..est.factors.len() {
            out.push(',');
            out.push_str(&fmt_f64(est.matrix[[i, j]]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_covariance(path: &Path) -> Result<(Vec<String>, Array2<f64>), StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| StoreError::Inconsistent(format!("{} is empty", path.display())))?;
    let factors: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let k = factors.len();
    let mut matrix = Array2::zeros((k, k));
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for (j, cell) in line.split(',').skip(1).enumerate() {
            matrix[[i, j]] = cell.trim().parse().map_err(|e| {
                StoreError::Inconsistent(format!("bad cell in {}: {e}", path.display()))
            })?;
        }
    }
    Ok((factors, matrix))
}

/// Idio diagnostics CSV: `stock,variance,gamma,h_n,Z_n,sigma_ts,sigma_str`.
pub fn write_delta(path: &Path, delta: &IdioVarianceVector) -> Result<(), StoreError> {
    let mut out = String::from("stock,variance,gamma,h_n,Z_n,sigma_ts,sigma_str\n");
    for (i, s) in delta.stocks.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s,
            fmt_f64(delta.variances[i]),
            fmt_f64(delta.gamma[i]),
            delta.h_n[i],
            if delta.z_n[i].is_finite() {
                fmt_f64(delta.z_n[i])
            } else {
                String::new()
            },
            if delta.sigma_ts[i].is_finite() {
                fmt_f64(delta.sigma_ts[i])
            } else {
                String::new()
            },
            if delta.sigma_str[i].is_finite() {
                fmt_f64(delta.sigma_str[i])
            } else {
                String::new()
            },
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn write_weights(path: &Path, stocks: &[StockId], weights: &[f64]) -> Result<(), StoreError> {
    let mut out = String::from("stock,weight\n");
    for (s, w) in stocks.iter().zip(weights) {
        out.push_str(&format!("{s},{}\n", fmt_f64(*w)));
    }
    fs::write(path, out).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::FactorKind;

    #[test]
    fn market_data_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d1 = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2021, 1, 5).unwrap();

        let returns = ReturnsPanel::new(
            vec![d1, d2],
            vec![StockId::new("A"), StockId::new("B")],
            ndarray::array![[0.01, -0.02], [0.005, f64::NAN]],
            ndarray::array![[true, true], [true, false]],
        )
        .unwrap();

        let mut exposures = BTreeMap::new();
        for d in [d1, d2] {
            let t = ExposureTensor::new(
                d,
                vec![StockId::new("A"), StockId::new("B")],
                vec!["Size".into(), "I0".into(), "CN".into()],
                vec![FactorKind::Style, FactorKind::Industry, FactorKind::Country],
                ndarray::array![[0.5, 1.0, 1.0], [-0.25, 1.0, 1.0]],
            )
            .unwrap();
            exposures.insert(d, t);
        }

        let mut caps = BTreeMap::new();
        for d in [d1, d2] {
            let mut m = BTreeMap::new();
            m.insert(StockId::new("A"), 10.0);
            m.insert(StockId::new("B"), 20.0);
            caps.insert(d, MarketCaps::new(m).unwrap());
        }

        let mut bw = BTreeMap::new();
        bw.insert(StockId::new("A"), 0.25);
        bw.insert(StockId::new("B"), 0.75);
        let benchmark = Some(BenchmarkWeights::new(bw).unwrap());

        let data = MarketData {
            returns,
            exposures,
            caps,
            benchmark,
            alpha: None,
        };
        write_market_data(dir.path(), &data).unwrap();
        let reread = load_market_data(dir.path()).unwrap();
        assert_eq!(reread.returns.dates(), data.returns.dates());
        assert_eq!(reread.exposures.len(), 2);
        assert_eq!(reread.caps[&d1].get(&StockId::new("B")), Some(20.0));
        assert_eq!(
            reread.benchmark.unwrap().get(&StockId::new("A")),
            Some(0.25)
        );
        assert!(reread.alpha.is_none());
    }

    #[test]
    fn dated_matrix_round_trip_preserves_nan_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let dates = vec![
            NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
            NaiveDate::from_ymd_opt(2021, 1, 5).unwrap(),
        ];
        let cols = vec!["x".to_string(), "y".to_string()];
        let values = ndarray::array![[1.5, f64::NAN], [0.25, -0.125]];
        write_dated_matrix(&path, &dates, &cols, &values).unwrap();
        let (d2, c2, v2) = read_dated_matrix(&path).unwrap();
        assert_eq!(d2, dates);
        assert_eq!(c2, cols);
        assert!(v2[[0, 1]].is_nan());
        assert_eq!(v2[[0, 0]].to_bits(), 1.5f64.to_bits());
        assert_eq!(v2[[1, 1]].to_bits(), (-0.125f64).to_bits());
    }

    #[test]
    fn universe_hash_is_order_sensitive_and_stable() {
        let a = vec![StockId::new("A"), StockId::new("B")];
        let b = vec![StockId::new("B"), StockId::new("A")];
        assert_ne!(universe_hash(&a), universe_hash(&b));
        assert_eq!(universe_hash(&a), universe_hash(&a));
    }
}
