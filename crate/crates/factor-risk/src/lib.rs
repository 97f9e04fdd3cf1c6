//! Structured multi-factor equity risk model.
//!
//! Stock returns are decomposed onto style, industry, and country factors:
//! r = Xf + u, and the stock covariance matrix is assembled as
//! V = XFXᵀ + Δ from a factor covariance F and diagonal idiosyncratic
//! variances Δ. The crate covers the full estimation chain — exposure
//! cleaning, constrained cross-sectional regression, exponentially weighted
//! covariance with serial-correlation adjustment, structurally adjusted
//! idiosyncratic variances — plus bias-statistic validation, quadratic-
//! programming portfolio construction, and a monthly-rebalance backtester.
//!
//! See the guide in `book/` for a narrative walk through each stage; its
//! code snippets compile as doc-tests against this crate.

pub mod backtest;
pub mod covariance;
pub mod exposure;
pub mod idio;
pub mod linalg;
pub mod model;
pub mod panel;
pub mod qp;
pub mod reference;
pub mod regression;
pub mod risk;
pub mod store;
pub mod synth;

pub use panel::{
    align_universe, AlphaVector, BenchmarkWeights, ExposureTensor, FactorKind, MarketCaps,
    PanelError, ReturnsPanel, StockId,
};

/// The guide chapters, compiled as doc-tests so every code snippet in the
/// book is checked against the current API.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/exposures.md")]
    pub mod exposures {}
    #[doc = include_str!("../../../book/src/factor-returns.md")]
    pub mod factor_returns {}
    #[doc = include_str!("../../../book/src/covariance.md")]
    pub mod covariance {}
    #[doc = include_str!("../../../book/src/idiosyncratic-risk.md")]
    pub mod idiosyncratic_risk {}
    #[doc = include_str!("../../../book/src/bias-statistics.md")]
    pub mod bias_statistics {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    pub mod optimization {}
    #[doc = include_str!("../../../book/src/backtesting.md")]
    pub mod backtesting {}
    #[doc = include_str!("../../../book/src/synthetic-markets.md")]
    pub mod synthetic_markets {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
