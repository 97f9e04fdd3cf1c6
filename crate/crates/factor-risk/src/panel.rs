//! Panel data model: daily returns, factor exposures, market caps, benchmark
//! weights and expected returns, with CSV ingestion and persistence.
//!
//! All types are immutable after construction and validated at the boundary;
//! downstream modules receive aligned, invariant-checked data and do not
//! re-validate. Missing returns are carried in a validity mask and never
//! imputed here — fill policy belongs to the exposure pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use thiserror::Error;

/// Sanity bound on daily simple returns; violations are rejected at ingestion.
pub const MAX_ABS_RETURN: f64 = 1.0;

/// Opaque stock identifier (e.g. an exchange ticker). Non-empty, unique
/// within a universe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StockId(String);

impl StockId {
    pub fn new(id: impl Into<String>) -> Self {
        let s = id.into();
        assert!(!s.is_empty(), "stock id must be non-empty");
        StockId(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StockId {
    fn from(s: &str) -> Self {
        StockId::new(s)
    }
}

/// Classification of a factor column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Style,
    Industry,
    Country,
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("malformed cell at {path}:{row},{column}: {detail}")]
    MalformedCell {
        path: String,
        row: usize,
        column: String,
        detail: String,
    },

    #[error("duplicate date {date} in {path}")]
    DuplicateDate { date: NaiveDate, path: String },

    #[error("empty panel in {path}")]
    EmptyPanel { path: String },

    #[error("stock {stock} has no industry assignment")]
    MissingIndustry { stock: StockId },

    #[error("stock {stock} is assigned to multiple industries")]
    MultipleIndustry { stock: StockId },

    #[error("exposure file has no country column")]
    NoCountryColumn,

    #[error("universe intersection across {sources:?} is empty")]
    EmptyIntersection { sources: Vec<String> },

    #[error("bad header in {path}: {detail}")]
    BadHeader { path: String, detail: String },

    #[error("invalid value in {path}: {detail}")]
    InvalidValue { path: String, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PanelError {
    pub fn code(&self) -> &'static str {
        match self {
            PanelError::MalformedCell { .. } => "MalformedCell",
            PanelError::DuplicateDate { .. } => "DuplicateDate",
            PanelError::EmptyPanel { .. } => "EmptyPanel",
            PanelError::MissingIndustry { .. } => "MissingIndustry",
            PanelError::MultipleIndustry { .. } => "MultipleIndustry",
            PanelError::NoCountryColumn => "NoCountryColumn",
            PanelError::EmptyIntersection { .. } => "EmptyIntersection",
            PanelError::BadHeader { .. } => "BadHeader",
            PanelError::InvalidValue { .. } => "InvalidValue",
            PanelError::Io { .. } => "Io",
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, PanelError> {
    fs::read_to_string(path).map_err(|source| PanelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_date(s: &str, path: &Path, row: usize) -> Result<NaiveDate, PanelError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| PanelError::MalformedCell {
        path: path.display().to_string(),
        row,
        column: "date".to_string(),
        detail: format!("{s:?}: {e}"),
    })
}

/// Shortest round-trip formatting; parsing the output reproduces the exact
/// f64 bit pattern for finite values.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Dates × stocks matrix of simple daily returns with a validity mask
/// (false = missing/suspended).
#[derive(Debug, Clone)]
pub struct ReturnsPanel {
    dates: Vec<NaiveDate>,
    stocks: Vec<StockId>,
    values: Array2<f64>,
    valid: Array2<bool>,
}

impl ReturnsPanel {
    /// Construct from parts, enforcing the type invariants: strictly
    /// increasing dates, finite values wherever valid, |r| < 1.
    pub fn new(
        dates: Vec<NaiveDate>,
        stocks: Vec<StockId>,
        values: Array2<f64>,
        valid: Array2<bool>,
    ) -> Result<Self, PanelError> {
        let here = "<memory>".to_string();
        if dates.is_empty() || stocks.is_empty() {
            return Err(PanelError::EmptyPanel { path: here });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(PanelError::DuplicateDate {
                    date: w[1],
                    path: here,
                });
            }
        }
        assert_eq!(values.dim(), (dates.len(), stocks.len()));
        assert_eq!(valid.dim(), (dates.len(), stocks.len()));
        for t in 0..dates.len() {
            for n in 0..stocks.len() {
                if valid[[t, n]] {
                    let v = values[[t, n]];
                    if !v.is_finite() || v.abs() >= MAX_ABS_RETURN {
                        return Err(PanelError::MalformedCell {
                            path: here,
                            row: t + 1,
                            column: stocks[n].to_string(),
                            detail: format!("return {v} out of range"),
                        });
                    }
                }
            }
        }
        Ok(ReturnsPanel {
            dates,
            stocks,
            values,
            valid,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn stocks(&self) -> &[StockId] {
        &self.stocks
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn stock_index(&self, stock: &StockId) -> Option<usize> {
        self.stocks.iter().position(|s| s == stock)
    }

    pub fn value(&self, t: usize, n: usize) -> f64 {
        self.values[[t, n]]
    }

    pub fn is_valid(&self, t: usize, n: usize) -> bool {
        self.valid[[t, n]]
    }

    /// Return of stock `n` at date index `t`, or None when masked.
    pub fn get(&self, t: usize, n: usize) -> Option<f64> {
        if self.valid[[t, n]] {
            Some(self.values[[t, n]])
        } else {
            None
        }
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Parse a returns CSV: header `date,STOCK1,STOCK2,...`, one row per
    /// trading date, empty cells marking missing observations.
    pub fn ingest(path: &Path) -> Result<Self, PanelError> {
        let text = read_to_string(path)?;
        let p = path.display().to_string();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| PanelError::EmptyPanel { path: p.clone() })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[0].trim() != "date" {
            return Err(PanelError::BadHeader {
                path: p,
                detail: "expected `date,STOCK1,...`".to_string(),
            });
        }
        let stocks: Vec<StockId> = cols[1..].iter().map(|s| StockId::new(s.trim())).collect();

        let mut rows: Vec<(NaiveDate, Vec<f64>, Vec<bool>)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let row_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(PanelError::MalformedCell {
                    path: p.clone(),
                    row: row_no,
                    column: "<row>".to_string(),
                    detail: format!("expected {} cells, found {}", cols.len(), cells.len()),
                });
            }
            let date = parse_date(cells[0], path, row_no)?;
            let mut vals = Vec::with_capacity(stocks.len());
            let mut mask = Vec::with_capacity(stocks.len());
            for (j, cell) in cells[1..].iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    vals.push(f64::NAN);
                    mask.push(false);
                    continue;
                }
                let v: f64 = cell.parse().map_err(|e| PanelError::MalformedCell {
                    path: p.clone(),
                    row: row_no,
                    column: stocks[j].to_string(),
                    detail: format!("{cell:?}: {e}"),
                })?;
                if !v.is_finite() || v.abs() >= MAX_ABS_RETURN {
                    return Err(PanelError::MalformedCell {
                        path: p.clone(),
                        row: row_no,
                        column: stocks[j].to_string(),
                        detail: format!("return {v} out of range (|r| must be < 1)"),
                    });
                }
                vals.push(v);
                mask.push(true);
            }
            rows.push((date, vals, mask));
        }
        if rows.is_empty() {
            return Err(PanelError::EmptyPanel { path: p });
        }
        rows.sort_by_key(|r| r.0);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(PanelError::DuplicateDate {
                    date: w[0].0,
                    path: p,
                });
            }
        }

        let dates: Vec<NaiveDate> = rows.iter().map(|r| r.0).collect();
        let mut values = Array2::from_elem((dates.len(), stocks.len()), f64::NAN);
        let mut valid = Array2::from_elem((dates.len(), stocks.len()), false);
        for (t, (_, vals, mask)) in rows.iter().enumerate() {
            for n in 0..stocks.len() {
                values[[t, n]] = vals[n];
                valid[[t, n]] = mask[n];
            }
        }
        Ok(ReturnsPanel {
            dates,
            stocks,
            values,
            valid,
        })
    }

    /// Write back to CSV; numeric content round-trips bit-exactly for finite
    /// values, masked cells become empty.
    pub fn write(&self, path: &Path) -> Result<(), PanelError> {
        let mut out = String::from("date");
        for s in &self.stocks {
            out.push(',');
            out.push_str(s.as_str());
        }
        out.push('\n');
        for (t, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for n in 0..self.stocks.len() {
                out.push(',');
                if self.valid[[t, n]] {
                    out.push_str(&fmt_f64(self.values[[t, n]]));
                }
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| PanelError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// One estimation date's stocks × factors exposure matrix with per-factor
/// kind tags. Industry columns are one-hot per stock; the single country
/// column is all ones; style columns may carry NaN before the exposure
/// pipeline fills them.
#[derive(Debug, Clone)]
pub struct ExposureTensor {
    date: NaiveDate,
    stocks: Vec<StockId>,
    factors: Vec<String>,
    kinds: Vec<FactorKind>,
    values: Array2<f64>,
}

impl ExposureTensor {
    pub fn new(
        date: NaiveDate,
        stocks: Vec<StockId>,
        factors: Vec<String>,
        kinds: Vec<FactorKind>,
        values: Array2<f64>,
    ) -> Result<Self, PanelError> {
        assert_eq!(factors.len(), kinds.len());
        assert_eq!(values.dim(), (stocks.len(), factors.len()));
        let t = ExposureTensor {
            date,
            stocks,
            factors,
            kinds,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), PanelError> {
        let country_cols: Vec<usize> = self.indices_of(FactorKind::Country).collect();
        if country_cols.len() != 1 {
            return Err(PanelError::NoCountryColumn);
        }
        let c = country_cols[0];
        for n in 0..self.stocks.len() {
            if self.values[[n, c]] != 1.0 {
                return Err(PanelError::InvalidValue {
                    path: "<exposures>".to_string(),
                    detail: format!("country exposure of {} is not 1", self.stocks[n]),
                });
            }
            let mut memberships = 0usize;
            for j in self.indices_of(FactorKind::Industry) {
                let v = self.values[[n, j]];
                if v != 0.0 && v != 1.0 {
                    return Err(PanelError::InvalidValue {
                        path: "<exposures>".to_string(),
                        detail: format!(
                            "industry exposure of {} on {} is {v}, expected 0 or 1",
                            self.stocks[n], self.factors[j]
                        ),
                    });
                }
                if v == 1.0 {
                    memberships += 1;
                }
            }
            if memberships == 0 {
                return Err(PanelError::MissingIndustry {
                    stock: self.stocks[n].clone(),
                });
            }
            if memberships > 1 {
                return Err(PanelError::MultipleIndustry {
                    stock: self.stocks[n].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn stocks(&self) -> &[StockId] {
        &self.stocks
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

    pub fn indices_of(&self, kind: FactorKind) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(move |(_, k)| **k == kind)
            .map(|(i, _)| i)
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f == name)
    }

    pub fn country_index(&self) -> usize {
        self.indices_of(FactorKind::Country)
            .next()
            .expect("validated tensor has a country column")
    }

    /// Industry column index of each stock.
    pub fn industry_of_stocks(&self) -> Vec<usize> {
        let ind: Vec<usize> = self.indices_of(FactorKind::Industry).collect();
        (0..self.stocks.len())
            .map(|n| {
                *ind.iter()
                    .find(|&&j| self.values[[n, j]] == 1.0)
                    .expect("validated tensor has one industry per stock")
            })
            .collect()
    }

    /// Restrict to a subset of stock rows (indices into the current order).
    pub fn select_stocks(&self, rows: &[usize]) -> ExposureTensor {
        let stocks = rows.iter().map(|&i| self.stocks[i].clone()).collect();
        let mut values = Array2::zeros((rows.len(), self.factors.len()));
        for (r, &i) in rows.iter().enumerate() {
            values.row_mut(r).assign(&self.values.row(i));
        }
        ExposureTensor {
            date: self.date,
            stocks,
            factors: self.factors.clone(),
            kinds: self.kinds.clone(),
            values,
        }
    }

    /// Replace the value matrix (used by the pipeline after processing style
    /// columns). Dimensions must match; industry/country invariants still
    /// hold because only style columns change.
    pub fn with_values(&self, values: Array2<f64>) -> ExposureTensor {
        assert_eq!(values.dim(), self.values.dim());
        ExposureTensor {
            date: self.date,
            stocks: self.stocks.clone(),
            factors: self.factors.clone(),
            kinds: self.kinds.clone(),
            values,
        }
    }

    /// Parse an exposures CSV: header `stock,style:Size,...,ind:Coal,...,
    /// country:CN`, one row per stock. Empty style cells become NaN.
    pub fn ingest(path: &Path, date: NaiveDate) -> Result<Self, PanelError> {
        let text = read_to_string(path)?;
        let p = path.display().to_string();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| PanelError::EmptyPanel { path: p.clone() })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[0].trim() != "stock" {
            return Err(PanelError::BadHeader {
                path: p,
                detail: "expected `stock,<kind:name>,...`".to_string(),
            });
        }
        let mut factors = Vec::new();
        let mut kinds = Vec::new();
        for c in &cols[1..] {
            let c = c.trim();
            let (kind, name) = if let Some(n) = c.strip_prefix("style:") {
                (FactorKind::Style, n)
            } else if let Some(n) = c.strip_prefix("ind:") {
                (FactorKind::Industry, n)
            } else if let Some(n) = c.strip_prefix("country:") {
                (FactorKind::Country, n)
            } else {
                return Err(PanelError::BadHeader {
                    path: p,
                    detail: format!("column {c:?} lacks a style:/ind:/country: prefix"),
                });
            };
            factors.push(name.to_string());
            kinds.push(kind);
        }
        if !kinds.contains(&FactorKind::Country) {
            return Err(PanelError::NoCountryColumn);
        }

        let mut stocks = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines.enumerate() {
            let row_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(PanelError::MalformedCell {
                    path: p.clone(),
                    row: row_no,
                    column: "<row>".to_string(),
                    detail: format!("expected {} cells, found {}", cols.len(), cells.len()),
                });
            }
            stocks.push(StockId::new(cells[0].trim()));
            let mut vals = Vec::with_capacity(factors.len());
            for (j, cell) in cells[1..].iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    if kinds[j] == FactorKind::Style {
                        vals.push(f64::NAN);
                        continue;
                    }
                    return Err(PanelError::MalformedCell {
                        path: p.clone(),
                        row: row_no,
                        column: factors[j].clone(),
                        detail: "empty cell in non-style column".to_string(),
                    });
                }
                let v: f64 = cell.parse().map_err(|e| PanelError::MalformedCell {
                    path: p.clone(),
                    row: row_no,
                    column: factors[j].clone(),
                    detail: format!("{cell:?}: {e}"),
                })?;
                vals.push(v);
            }
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(PanelError::EmptyPanel { path: p });
        }
        let mut values = Array2::zeros((stocks.len(), factors.len()));
        for (n, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                values[[n, j]] = v;
            }
        }
        ExposureTensor::new(date, stocks, factors, kinds, values)
    }

    /// Write to CSV in the ingestion format (NaN style cells become empty).
    pub fn write(&self, path: &Path) -> Result<(), PanelError> {
        let mut out = String::from("stock");
        for (name, kind) in self.factors.iter().zip(&self.kinds) {
            let prefix = match kind {
                FactorKind::Style => "style:",
                FactorKind::Industry => "ind:",
                FactorKind::Country => "country:",
            };
            out.push(',');
            out.push_str(prefix);
            out.push_str(name);
        }
        out.push('\n');
        for (n, s) in self.stocks.iter().enumerate() {
            out.push_str(s.as_str());
            for j in 0..self.factors.len() {
                out.push(',');
                let v = self.values[[n, j]];
                if v.is_finite() {
                    out.push_str(&fmt_f64(v));
                }
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| PanelError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Parse a two-column `stock,<value>` CSV into an ordered map.
fn ingest_two_column(
    path: &Path,
    value_header: &str,
) -> Result<BTreeMap<StockId, f64>, PanelError> {
    let text = read_to_string(path)?;
    let p = path.display().to_string();
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| PanelError::EmptyPanel { path: p.clone() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2 || cols[0] != "stock" || cols[1] != value_header {
        return Err(PanelError::BadHeader {
            path: p,
            detail: format!("expected `stock,{value_header}`"),
        });
    }
    let mut map = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 2 {
            return Err(PanelError::MalformedCell {
                path: p.clone(),
                row: i + 2,
                column: "<row>".to_string(),
                detail: "expected 2 cells".to_string(),
            });
        }
        let v: f64 = cells[1]
            .trim()
            .parse()
            .map_err(|e| PanelError::MalformedCell {
                path: p.clone(),
                row: i + 2,
                column: value_header.to_string(),
                detail: format!("{:?}: {e}", cells[1]),
            })?;
        map.insert(StockId::new(cells[0].trim()), v);
    }
    if map.is_empty() {
        return Err(PanelError::EmptyPanel { path: p });
    }
    Ok(map)
}

fn write_two_column(
    map: &BTreeMap<StockId, f64>,
    path: &Path,
    value_header: &str,
) -> Result<(), PanelError> {
    let mut out = format!("stock,{value_header}\n");
    for (s, v) in map {
        out.push_str(s.as_str());
        out.push(',');
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| PanelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Circulating market capitalizations for one date; strictly positive.
#[derive(Debug, Clone)]
pub struct MarketCaps {
    caps: BTreeMap<StockId, f64>,
}

impl MarketCaps {
    pub fn new(caps: BTreeMap<StockId, f64>) -> Result<Self, PanelError> {
        for (s, &c) in &caps {
            if !(c > 0.0) || !c.is_finite() {
                return Err(PanelError::InvalidValue {
                    path: "<caps>".to_string(),
                    detail: format!("cap of {s} is {c}, must be positive"),
                });
            }
        }
        Ok(MarketCaps { caps })
    }

    pub fn ingest(path: &Path) -> Result<Self, PanelError> {
        Self::new(ingest_two_column(path, "cap")?)
    }

    pub fn write(&self, path: &Path) -> Result<(), PanelError> {
        write_two_column(&self.caps, path, "cap")
    }

    pub fn get(&self, stock: &StockId) -> Option<f64> {
        self.caps.get(stock).copied()
    }

    pub fn stocks(&self) -> impl Iterator<Item = &StockId> {
        self.caps.keys()
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }
}

/// Benchmark index weights for one date; nonnegative, summing to one.
#[derive(Debug, Clone)]
pub struct BenchmarkWeights {
    weights: BTreeMap<StockId, f64>,
}

impl BenchmarkWeights {
    pub fn new(weights: BTreeMap<StockId, f64>) -> Result<Self, PanelError> {
        let mut sum = 0.0;
        for (s, &w) in &weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(PanelError::InvalidValue {
                    path: "<benchmark>".to_string(),
                    detail: format!("weight of {s} is {w}, must be nonnegative"),
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(PanelError::InvalidValue {
                path: "<benchmark>".to_string(),
                detail: format!("weights sum to {sum}, expected 1 ± 1e-9"),
            });
        }
        Ok(BenchmarkWeights { weights })
    }

    pub fn ingest(path: &Path) -> Result<Self, PanelError> {
        Self::new(ingest_two_column(path, "weight")?)
    }

    pub fn write(&self, path: &Path) -> Result<(), PanelError> {
        write_two_column(&self.weights, path, "weight")
    }

    pub fn get(&self, stock: &StockId) -> Option<f64> {
        self.weights.get(stock).copied()
    }

    pub fn stocks(&self) -> impl Iterator<Item = &StockId> {
        self.weights.keys()
    }
}

/// Expected monthly returns from a return model; finite.
#[derive(Debug, Clone)]
pub struct AlphaVector {
    alphas: BTreeMap<StockId, f64>,
}

impl AlphaVector {
    pub fn new(alphas: BTreeMap<StockId, f64>) -> Result<Self, PanelError> {
        for (s, &a) in &alphas {
            if !a.is_finite() {
                return Err(PanelError::InvalidValue {
                    path: "<alpha>".to_string(),
                    detail: format!("alpha of {s} is {a}"),
                });
            }
        }
        Ok(AlphaVector { alphas })
    }

    pub fn ingest(path: &Path) -> Result<Self, PanelError> {
        Self::new(ingest_two_column(path, "alpha")?)
    }

    pub fn write(&self, path: &Path) -> Result<(), PanelError> {
        write_two_column(&self.alphas, path, "alpha")
    }

    pub fn get(&self, stock: &StockId) -> Option<f64> {
        self.alphas.get(stock).copied()
    }

    pub fn stocks(&self) -> impl Iterator<Item = &StockId> {
        self.alphas.keys()
    }
}

/// Result of intersecting stock universes across data sources.
#[derive(Debug, Clone)]
pub struct UniverseAlignment {
    /// Intersection, ordered consistently with the reference ordering.
    pub universe: Vec<StockId>,
    /// Stocks each source had that did not survive the intersection.
    pub dropped: Vec<(String, Vec<StockId>)>,
}

/// Intersect named stock sets into a joint universe ordered by `order`
/// (typically the returns panel's stock order). Idempotent and independent
/// of the order in which sources are supplied.
pub fn align_universe(
    sources: &[(&str, Vec<StockId>)],
    order: &[StockId],
) -> Result<UniverseAlignment, PanelError> {
    assert!(!sources.is_empty());
    let sets: Vec<std::collections::BTreeSet<&StockId>> =
        sources.iter().map(|(_, v)| v.iter().collect()).collect();
    let universe: Vec<StockId> = order
        .iter()
        .filter(|s| sets.iter().all(|set| set.contains(s)))
        .cloned()
        .collect();
    if universe.is_empty() {
        return Err(PanelError::EmptyIntersection {
            sources: sources.iter().map(|(n, _)| n.to_string()).collect(),
        });
    }
    let in_universe: std::collections::BTreeSet<&StockId> = universe.iter().collect();
    let dropped = sources
        .iter()
        .map(|(name, v)| {
            let d: Vec<StockId> = v
                .iter()
                .filter(|s| !in_universe.contains(s))
                .cloned()
                .collect();
            (name.to_string(), d)
        })
        .collect();
    Ok(UniverseAlignment { universe, dropped })
}
