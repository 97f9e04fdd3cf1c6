//! Portfolio construction as convex quadratic programming.
//!
//! Four programs are supported, all over the assembled risk model
//! V = XFXᵀ + Δ:
//!
//! * minimum absolute risk: min wᵀVw over holdings w
//! * minimum active risk: min aᵀVa over active weights a = w − w_bench
//! * maximum risk-adjusted absolute return: max wᵀr − λ·wᵀVw
//! * maximum risk-adjusted active return: max aᵀr − λ·aᵀVa
//!
//! under any combination of long-only, budget, per-stock cap, industry-
//! neutrality, and size-exposure-band constraints. Problems are solved by a
//! deterministic primal active-set method on the factored Hessian; solutions
//! carry exact KKT residuals.

mod active_set;

pub use active_set::{
    find_feasible, max_violation, solve, solve_from, CanonicalQp, Constraint, FactoredHessian,
    QpTolerances, RawSolution, SolverError,
};

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::FactorKind;
use crate::risk::RiskModelSnapshot;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("objective requires an alpha vector")]
    MissingAlpha,

    #[error("problem requires benchmark weights ({context})")]
    MissingBenchmark { context: String },

    #[error("size-band constraint references unknown style factor {name}")]
    MissingSizeFactor { name: String },

    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },

    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl QpError {
    pub fn code(&self) -> &'static str {
        match self {
            QpError::MissingAlpha => "MissingAlpha",
            QpError::MissingBenchmark { .. } => "MissingBenchmark",
            QpError::MissingSizeFactor { .. } => "MissingSizeFactor",
            QpError::DimensionMismatch { .. } => "DimensionMismatch",
            QpError::Solver(e) => e.code(),
        }
    }
}

/// Objective family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinRisk,
    MaxRiskAdjusted,
}

/// Whether the decision variable is the holding weight or the offset from
/// the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Absolute,
    Active,
}

/// Constraint toggles shared by all four programs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSet {
    pub long_only: bool,
    /// Total holding weight, normally 1.
    pub budget: f64,
    /// Per-stock holding cap (e.g. 0.01).
    pub per_stock_cap: Option<f64>,
    /// Force zero active exposure to every industry factor.
    pub industry_neutral: bool,
    /// Band on the absolute active exposure to the size factor.
    pub size_band: Option<f64>,
    /// Name of the style factor the band applies to.
    pub size_factor: String,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            long_only: true,
            budget: 1.0,
            per_stock_cap: None,
            industry_neutral: false,
            size_band: None,
            size_factor: "Size".to_string(),
        }
    }
}

/// A fully specified portfolio program over one risk-model snapshot.
#[derive(Debug, Clone)]
pub struct PortfolioProblem<'a> {
    pub objective: Objective,
    pub weight_mode: WeightMode,
    pub snapshot: &'a RiskModelSnapshot,
    /// Expected returns aligned to the snapshot universe; required for the
    /// risk-adjusted objectives.
    pub alpha: Option<Vec<f64>>,
    /// Risk-aversion coefficient λ ≥ 0 (ignored by the min-risk objectives).
    pub lambda: f64,
    /// Benchmark weights aligned to the snapshot universe.
    pub benchmark: Option<Vec<f64>>,
    pub constraints: ConstraintSet,
}

/// Solver status of a finished solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Optimal portfolio in holding space with solver diagnostics.
#[derive(Debug, Clone)]
pub struct PortfolioSolution {
    /// Holding weights (benchmark added back in active mode).
    pub weights: Vec<f64>,
    /// Value of the program's stated objective in its decision space.
    pub objective_value: f64,
    /// Predicted variance xᵀVx in the decision space (active risk for the
    /// active programs).
    pub predicted_risk: f64,
    /// Predicted alpha αᵀx in the decision space; zero for min-risk programs.
    pub predicted_alpha: f64,
    pub kkt_residual: f64,
    pub active_constraints: Vec<String>,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Map a portfolio program onto the canonical QP form. Also returns the
/// benchmark vector when the decision variable is the active weight.
pub fn build_qp(
    problem: &PortfolioProblem<'_>,
) -> Result<(CanonicalQp, Option<Vec<f64>>), QpError> {
    let snap = problem.snapshot;
    let n = snap.n_stocks();
    let cons = &problem.constraints;

    let needs_benchmark = matches!(problem.weight_mode, WeightMode::Active)
        || cons.industry_neutral
        || cons.size_band.is_some();
    let benchmark = match (&problem.benchmark, needs_benchmark) {
        (Some(b), _) => {
            if b.len() != n {
                return Err(QpError::DimensionMismatch {
                    detail: format!("{} benchmark weights for {} stocks", b.len(), n),
                });
            }
            Some(b.clone())
        }
        (None, true) => {
            return Err(QpError::MissingBenchmark {
                context: "active mode or benchmark-relative constraints".to_string(),
            })
        }
        (None, false) => None,
    };

    let alpha = match (&problem.alpha, problem.objective) {
        (Some(a), _) => {
            if a.len() != n {
                return Err(QpError::DimensionMismatch {
                    detail: format!("{} alphas for {} stocks", a.len(), n),
                });
            }
            Some(a.clone())
        }
        (None, Objective::MaxRiskAdjusted) => return Err(QpError::MissingAlpha),
        (None, Objective::MinRisk) => None,
    };

    assert!(problem.lambda >= 0.0, "lambda must be nonnegative");
    let scale = match problem.objective {
        Objective::MinRisk => 2.0,
        Objective::MaxRiskAdjusted => 2.0 * problem.lambda,
    };
    let hessian = FactoredHessian::new(
        snap.exposures.values().clone(),
        snap.factor_cov.matrix.clone(),
        Array1::from_iter(snap.idio.variances.iter().copied()),
        scale,
    );
    let linear = match (problem.objective, &alpha) {
        (Objective::MaxRiskAdjusted, Some(a)) => Array1::from_iter(a.iter().map(|v| -v)),
        _ => Array1::zeros(n),
    };

    let active_mode = matches!(problem.weight_mode, WeightMode::Active);
    let bench_or_zero = |i: usize| benchmark.as_ref().map(|b| b[i]).unwrap_or(0.0);

    // Box bounds in the decision space.
    let mut lb = Array1::from_elem(n, f64::NEG_INFINITY);
    let mut ub = Array1::from_elem(n, f64::INFINITY);
    if cons.long_only {
        for i in 0..n {
            lb[i] = if active_mode { -bench_or_zero(i) } else { 0.0 };
        }
    }
    if let Some(cap) = cons.per_stock_cap {
        assert!(cap > 0.0, "per-stock cap must be positive");
        for i in 0..n {
            ub[i] = if active_mode {
                cap - bench_or_zero(i)
            } else {
                cap
            };
        }
    }

    // Budget row.
    let mut eq = Vec::new();
    let ones = Array1::from_elem(n, 1.0);
    let budget_rhs = if active_mode {
        let bench_sum: f64 = benchmark
            .as_ref()
            .expect("active mode has benchmark")
            .iter()
            .sum();
        cons.budget - bench_sum
    } else {
        cons.budget
    };
    eq.push((ones, budget_rhs));

    // Industry neutrality rows.
    if cons.industry_neutral {
        let bench = benchmark.as_ref().expect("checked above");
        let values = snap.exposures.values();
        for j in snap.exposures.indices_of(FactorKind::Industry) {
            let row = Array1::from_iter((0..n).map(|i| values[[i, j]]));
            let rhs = if active_mode {
                0.0
            } else {
                (0..n).map(|i| values[[i, j]] * bench[i]).sum()
            };
            eq.push((row, rhs));
        }
    }

    // Size band split into two inequality rows.
    let mut ineq = Vec::new();
    if let Some(band) = cons.size_band {
        assert!(band >= 0.0, "size band must be nonnegative");
        let bench = benchmark.as_ref().expect("checked above");
        let j = snap
            .exposures
            .factor_index(&cons.size_factor)
            .filter(|&j| snap.exposures.kinds()[j] == FactorKind::Style)
            .ok_or_else(|| QpError::MissingSizeFactor {
                name: cons.size_factor.clone(),
            })?;
        let values = snap.exposures.values();
        let size_col = Array1::from_iter((0..n).map(|i| values[[i, j]]));
        let bench_size: f64 = (0..n).map(|i| values[[i, j]] * bench[i]).sum();
        let (hi, lo) = if active_mode {
            (band, band)
        } else {
            (band + bench_size, band - bench_size)
        };
        ineq.push((size_col.clone(), hi));
        ineq.push((size_col.mapv(|v| -v), lo));
    }

    Ok((
        CanonicalQp {
            hessian,
            linear,
            eq,
            lb,
            ub,
            ineq,
        },
        if active_mode { benchmark } else { None },
    ))
}

/// Greedy feasible candidate for budget-and-box problems: start every
/// variable at its clamped base and pour the remaining budget in index
/// order.
fn greedy_budget_candidate(qp: &CanonicalQp, rhs: f64) -> Array1<f64> {
    let n = qp.linear.len();
    let mut x = Array1::zeros(n);
    for i in 0..n {
        x[i] = 0.0f64.clamp(
            if qp.lb[i].is_finite() {
                qp.lb[i]
            } else {
                f64::NEG_INFINITY
            },
            if qp.ub[i].is_finite() {
                qp.ub[i]
            } else {
                f64::INFINITY
            },
        );
    }
    let mut remaining = rhs - x.sum();
    for i in 0..n {
        if remaining.abs() <= 1e-15 {
            break;
        }
        if remaining > 0.0 {
            let room = qp.ub[i] - x[i];
            let add = if room.is_finite() {
                room.min(remaining)
            } else {
                remaining
            };
            x[i] += add;
            remaining -= add;
        } else {
            let room = x[i] - qp.lb[i];
            let sub = if room.is_finite() {
                room.min(-remaining)
            } else {
                -remaining
            };
            x[i] -= sub;
            remaining += sub;
        }
    }
    x
}

/// Solve a portfolio program end to end.
pub fn solve_portfolio(
    problem: &PortfolioProblem<'_>,
    tol: &QpTolerances,
) -> Result<PortfolioSolution, QpError> {
    let (qp, active_benchmark) = build_qp(problem)?;
    let n = qp.linear.len();

    let mut candidates = Vec::new();
    if matches!(problem.weight_mode, WeightMode::Active) {
        // The benchmark itself (zero active weights).
        candidates.push(Array1::zeros(n));
    } else if let Some(b) = &problem.benchmark {
        candidates.push(Array1::from_iter(b.iter().copied()));
    }
    if qp.eq.len() == 1 {
        candidates.push(greedy_budget_candidate(&qp, qp.eq[0].1));
    }

    let raw = active_set::solve(&qp, &candidates, tol)?;

    let alpha_vec = problem.alpha.clone().unwrap_or_default();
    let predicted_alpha = if alpha_vec.is_empty() {
        0.0
    } else {
        raw.x.iter().zip(&alpha_vec).map(|(x, a)| x * a).sum()
    };
    // xᵀVx in decision space: the Hessian is scale·V, so divide out.
    let scale = match problem.objective {
        Objective::MinRisk => 2.0,
        Objective::MaxRiskAdjusted => 2.0 * problem.lambda,
    };
    let predicted_risk = if scale > 0.0 {
        qp.hessian.quad(raw.x.view()) / scale
    } else {
        // λ = 0: evaluate through the snapshot.
        problem
            .snapshot
            .portfolio_variance(&raw.x.to_vec())
            .unwrap_or(0.0)
    };
    let objective_value = match problem.objective {
        Objective::MinRisk => predicted_risk,
        Objective::MaxRiskAdjusted => predicted_alpha - problem.lambda * predicted_risk,
    };

    let weights = match &active_benchmark {
        Some(b) => raw.x.iter().zip(b).map(|(x, w)| x + w).collect(),
        None => raw.x.to_vec(),
    };

    Ok(PortfolioSolution {
        weights,
        objective_value,
        predicted_risk,
        predicted_alpha,
        kkt_residual: raw.kkt_residual,
        active_constraints: raw.active_constraints.iter().map(|c| c.label()).collect(),
        iterations: raw.iterations,
        status: SolveStatus::Optimal,
    })
}

/// Suggested risk-aversion coefficient from a historical reward ratio
/// (Sharpe or information ratio) and a target volatility: λ* = ratio / (2σ*).
pub fn lambda_range(reward_ratio: f64, target_vol: f64) -> f64 {
    assert!(target_vol > 0.0, "target volatility must be positive");
    reward_ratio / (2.0 * target_vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{CovarianceEstimate, CovarianceStage};
    use crate::idio::{IdioMode, IdioVarianceVector};
    use crate::panel::{ExposureTensor, StockId};
    use crate::reference::{solve_qp_enumerate, DenseQp};
    use chrono::NaiveDate;
    use ndarray::Array2;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, 1).unwrap()
    }

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        }
    }

    /// Snapshot with a diagonal factor structure so V is easy to reason
    /// about: one industry, no styles → V = F_cc·11ᵀ + Δ... for toy tests we
    /// mostly want V = diag, so use zero factor covariance.
    fn diag_snapshot(idio: Vec<f64>) -> RiskModelSnapshot {
        let n = idio.len();
        let stocks: Vec<StockId> = (0..n).map(|i| StockId::new(format!("S{i}"))).collect();
        let factors = vec!["CN".to_string(), "I0".to_string()];
        let kinds = vec![FactorKind::Country, FactorKind::Industry];
        let mut values = Array2::zeros((n, 2));
        for i in 0..n {
            values[[i, 0]] = 1.0;
            values[[i, 1]] = 1.0;
        }
        let exposures =
            ExposureTensor::new(date(), stocks.clone(), factors.clone(), kinds, values).unwrap();
        let factor_cov = CovarianceEstimate {
            factors,
            matrix: Array2::zeros((2, 2)),
            stage: CovarianceStage::Monthly,
            date: date(),
        };
        let vols = idio.iter().map(|v| v.sqrt()).collect::<Vec<_>>();
        let idio = IdioVarianceVector {
            stocks,
            variances: idio,
            gamma: vec![1.0; n],
            h_n: vec![200; n],
            z_n: vec![0.0; n],
            sigma_ts: vols.clone(),
            sigma_str: vols,
            mode: IdioMode::Structural,
            warnings: Vec::new(),
        };
        RiskModelSnapshot::new(date(), exposures, factor_cov, idio).unwrap()
    }

    fn rich_snapshot(n: usize, n_ind: usize, n_style: usize, seed: u64) -> RiskModelSnapshot {
        let mut next = lcg(seed);
        let stocks: Vec<StockId> = (0..n).map(|i| StockId::new(format!("S{i:02}"))).collect();
        let mut factors = vec!["CN".to_string()];
        let mut kinds = vec![FactorKind::Country];
        for i in 0..n_ind {
            factors.push(format!("I{i}"));
            kinds.push(FactorKind::Industry);
        }
        for s in 0..n_style {
            factors.push(if s == 0 {
                "Size".to_string()
            } else {
                format!("Y{s}")
            });
            kinds.push(FactorKind::Style);
        }
        let k = factors.len();
        let mut values = Array2::zeros((n, k));
        for i in 0..n {
            values[[i, 0]] = 1.0;
            values[[i, 1 + i % n_ind]] = 1.0;
            for s in 0..n_style {
                values[[i, 1 + n_ind + s]] = next() * 2.0;
            }
        }
        let exposures =
            ExposureTensor::new(date(), stocks.clone(), factors.clone(), kinds, values).unwrap();
        let mut b = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                b[[i, j]] = next() * 0.01;
            }
        }
        let f = b.dot(&b.t());
        let factor_cov = CovarianceEstimate {
            factors,
            matrix: f,
            stage: CovarianceStage::Monthly,
            date: date(),
        };
        let variances: Vec<f64> = (0..n).map(|_| next().abs() * 0.002 + 0.0004).collect();
        let vols = variances.iter().map(|v| v.sqrt()).collect::<Vec<_>>();
        let idio = IdioVarianceVector {
            stocks,
            variances,
            gamma: vec![1.0; n],
            h_n: vec![200; n],
            z_n: vec![0.0; n],
            sigma_ts: vols.clone(),
            sigma_str: vols,
            mode: IdioMode::Structural,
            warnings: Vec::new(),
        };
        RiskModelSnapshot::new(date(), exposures, factor_cov, idio).unwrap()
    }

    #[test]
    fn min_variance_inverse_variance_toy() {
        let snap = diag_snapshot(vec![1.0, 4.0]);
        let problem = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: None,
            constraints: ConstraintSet::default(),
        };
        let sol = solve_portfolio(&problem, &QpTolerances::default()).unwrap();
        assert!((sol.weights[0] - 0.8).abs() < 1e-8, "{:?}", sol.weights);
        assert!((sol.weights[1] - 0.2).abs() < 1e-8);
        assert!(sol.kkt_residual <= 1e-6);
        assert_eq!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn zero_lambda_is_greedy_by_alpha() {
        let snap = diag_snapshot(vec![0.01, 0.01, 0.01]);
        let problem = PortfolioProblem {
            objective: Objective::MaxRiskAdjusted,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: Some(vec![0.3, 0.2, 0.1]),
            lambda: 0.0,
            benchmark: None,
            constraints: ConstraintSet {
                per_stock_cap: Some(0.5),
                ..ConstraintSet::default()
            },
        };
        let sol = solve_portfolio(&problem, &QpTolerances::default()).unwrap();
        assert!((sol.weights[0] - 0.5).abs() < 1e-8, "{:?}", sol.weights);
        assert!((sol.weights[1] - 0.5).abs() < 1e-8);
        assert!(sol.weights[2].abs() < 1e-8);
    }

    #[test]
    fn infeasible_cap_detected() {
        let snap = diag_snapshot(vec![0.01; 50]);
        let problem = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: None,
            constraints: ConstraintSet {
                per_stock_cap: Some(0.01),
                ..ConstraintSet::default()
            },
        };
        let err = solve_portfolio(&problem, &QpTolerances::default()).unwrap_err();
        assert_eq!(err.code(), "Infeasible");
    }

    #[test]
    fn active_mode_box_example() {
        // Benchmark weight 0.004 and cap 0.01 make the active box
        // [-0.004, 0.006].
        let snap = diag_snapshot(vec![0.01; 250]);
        let bench = vec![0.004; 250];
        let problem = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Active,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: Some(bench),
            constraints: ConstraintSet {
                per_stock_cap: Some(0.01),
                ..ConstraintSet::default()
            },
        };
        let (qp, _) = build_qp(&problem).unwrap();
        assert!((qp.lb[0] + 0.004).abs() < 1e-15);
        assert!((qp.ub[0] - 0.006).abs() < 1e-15);
        // Budget in active space is zero.
        assert!((qp.eq[0].1 - 0.0).abs() < 1e-12);
    }

    #[test]
    fn size_band_splits_into_two_rows() {
        let snap = rich_snapshot(10, 2, 2, 3);
        let bench = vec![0.1; 10];
        let problem = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: Some(bench),
            constraints: ConstraintSet {
                size_band: Some(0.5),
                ..ConstraintSet::default()
            },
        };
        let (qp, _) = build_qp(&problem).unwrap();
        assert_eq!(qp.ineq.len(), 2);
        for i in 0..10 {
            assert_eq!(qp.ineq[0].0[i], -qp.ineq[1].0[i]);
        }
    }

    #[test]
    fn missing_inputs_are_reported() {
        let snap = diag_snapshot(vec![0.01, 0.02]);
        let mut problem = PortfolioProblem {
            objective: Objective::MaxRiskAdjusted,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: None,
            constraints: ConstraintSet::default(),
        };
        assert_eq!(build_qp(&problem).unwrap_err().code(), "MissingAlpha");
        problem.alpha = Some(vec![0.1, 0.2]);
        problem.weight_mode = WeightMode::Active;
        assert_eq!(build_qp(&problem).unwrap_err().code(), "MissingBenchmark");
    }

    /// Convert a canonical QP to the dense enumeration form.
    fn to_dense(qp: &CanonicalQp) -> DenseQp {
        let n = qp.linear.len();
        let mut hessian = Array2::zeros((n, n));
        for j in 0..n {
            let mut e = Array1::zeros(n);
            e[j] = 1.0;
            hessian.column_mut(j).assign(&qp.hessian.apply(e.view()));
        }
        let eq_lhs = if qp.eq.is_empty() {
            Array2::zeros((0, n))
        } else {
            let mut m = Array2::zeros((qp.eq.len(), n));
            for (i, (a, _)) in qp.eq.iter().enumerate() {
                m.row_mut(i).assign(a);
            }
            m
        };
        let eq_rhs = Array1::from_iter(qp.eq.iter().map(|(_, b)| *b));
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (a, b) in &qp.ineq {
            rows.push(a.clone());
            rhs.push(*b);
        }
        for i in 0..n {
            if qp.lb[i].is_finite() {
                let mut r = Array1::zeros(n);
                r[i] = -1.0;
                rows.push(r);
                rhs.push(-qp.lb[i]);
            }
            if qp.ub[i].is_finite() {
                let mut r = Array1::zeros(n);
                r[i] = 1.0;
                rows.push(r);
                rhs.push(qp.ub[i]);
            }
        }
        let mut ineq_lhs = Array2::zeros((rows.len(), n));
        for (i, r) in rows.iter().enumerate() {
            ineq_lhs.row_mut(i).assign(r);
        }
        DenseQp {
            hessian,
            linear: qp.linear.clone(),
            eq_lhs,
            eq_rhs,
            ineq_lhs,
            ineq_rhs: Array1::from_iter(rhs),
        }
    }

    #[test]
    fn random_small_problems_match_enumeration_oracle() {
        let mut next = lcg(4242);
        let mut solved = 0;
        for trial in 0..60 {
            let n = 2 + (trial % 5);
            let snap = rich_snapshot(n, 2.min(n), 1, 1000 + trial as u64);
            let variant = trial % 4;
            let bench: Vec<f64> = {
                let raw: Vec<f64> = (0..n).map(|_| next().abs() + 0.05).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            };
            let alpha: Vec<f64> = (0..n).map(|_| next() * 0.05).collect();
            let problem = PortfolioProblem {
                objective: if variant < 2 {
                    Objective::MinRisk
                } else {
                    Objective::MaxRiskAdjusted
                },
                weight_mode: if variant % 2 == 0 {
                    WeightMode::Absolute
                } else {
                    WeightMode::Active
                },
                snapshot: &snap,
                alpha: if variant < 2 { None } else { Some(alpha) },
                lambda: 0.5 + next().abs() * 2.0,
                benchmark: Some(bench),
                constraints: ConstraintSet {
                    per_stock_cap: Some(0.8),
                    ..ConstraintSet::default()
                },
            };
            let (qp, _) = build_qp(&problem).unwrap();
            let sol = solve_portfolio(&problem, &QpTolerances::default()).unwrap();
            let dense = to_dense(&qp);
            if let Some((_, obj)) = solve_qp_enumerate(&dense, 1e-9) {
                let raw = active_set::solve(&qp, &[], &QpTolerances::default()).unwrap();
                assert!(
                    (raw.objective - obj).abs() <= 1e-8 * (1.0 + obj.abs()),
                    "trial {trial}: solver {} vs oracle {}",
                    raw.objective,
                    obj
                );
                solved += 1;
            }
            assert!(
                sol.kkt_residual <= 1e-6,
                "trial {trial} kkt {}",
                sol.kkt_residual
            );
        }
        assert!(solved >= 50, "oracle verified only {solved} problems");
    }

    #[test]
    fn lambda_monotonicity_on_fixed_problem() {
        let snap = rich_snapshot(20, 3, 2, 7);
        let mut next = lcg(5);
        let alpha: Vec<f64> = (0..20).map(|_| next() * 0.05).collect();
        let mut prev_risk = f64::INFINITY;
        let mut prev_alpha = f64::INFINITY;
        for &lambda in &[0.0, 0.5, 1.0, 2.0] {
            let problem = PortfolioProblem {
                objective: Objective::MaxRiskAdjusted,
                weight_mode: WeightMode::Absolute,
                snapshot: &snap,
                alpha: Some(alpha.clone()),
                lambda,
                benchmark: None,
                constraints: ConstraintSet {
                    per_stock_cap: Some(0.25),
                    ..ConstraintSet::default()
                },
            };
            let sol = solve_portfolio(&problem, &QpTolerances::default()).unwrap();
            assert!(
                sol.predicted_risk <= prev_risk + 1e-9,
                "risk rose at λ={lambda}"
            );
            assert!(
                sol.predicted_alpha <= prev_alpha + 1e-9,
                "alpha rose at λ={lambda}"
            );
            prev_risk = sol.predicted_risk;
            prev_alpha = sol.predicted_alpha;
        }
    }

    #[test]
    fn alpha_lambda_homogeneity() {
        let snap = rich_snapshot(12, 2, 1, 19);
        let mut next = lcg(6);
        let alpha: Vec<f64> = (0..12).map(|_| next() * 0.05).collect();
        let scaled: Vec<f64> = alpha.iter().map(|a| a * 3.0).collect();
        let base = PortfolioProblem {
            objective: Objective::MaxRiskAdjusted,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: Some(alpha),
            lambda: 0.7,
            benchmark: None,
            constraints: ConstraintSet {
                per_stock_cap: Some(0.4),
                ..ConstraintSet::default()
            },
        };
        let scaled_problem = PortfolioProblem {
            alpha: Some(scaled),
            lambda: 0.7 * 3.0,
            ..base.clone()
        };
        let a = solve_portfolio(&base, &QpTolerances::default()).unwrap();
        let b = solve_portfolio(&scaled_problem, &QpTolerances::default()).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-7, "{x} vs {y}");
        }
    }

    #[test]
    fn active_mode_fixed_point_on_benchmark_equal_to_min_risk() {
        // When the benchmark already is the constrained minimum-risk
        // portfolio, the min-active-risk solution holds zero active weights.
        let snap = rich_snapshot(10, 2, 1, 77);
        let min_abs = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: None,
            constraints: ConstraintSet::default(),
        };
        let w_star = solve_portfolio(&min_abs, &QpTolerances::default())
            .unwrap()
            .weights;
        let min_active = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Active,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: Some(w_star.clone()),
            constraints: ConstraintSet::default(),
        };
        let sol = solve_portfolio(&min_active, &QpTolerances::default()).unwrap();
        for (w, b) in sol.weights.iter().zip(&w_star) {
            assert!(
                (w - b).abs() < 1e-6,
                "active solution moved off the benchmark"
            );
        }
    }

    #[test]
    fn constraints_verified_by_substitution() {
        // Industry-neutral, banded, capped problem: every declared constraint
        // is checked directly on the returned weights.
        let snap = rich_snapshot(24, 3, 2, 55);
        let mut next = lcg(3);
        let bench: Vec<f64> = {
            let raw: Vec<f64> = (0..24).map(|_| next().abs() + 0.2).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let alpha: Vec<f64> = (0..24).map(|_| next() * 0.04).collect();
        let problem = PortfolioProblem {
            objective: Objective::MaxRiskAdjusted,
            weight_mode: WeightMode::Active,
            snapshot: &snap,
            alpha: Some(alpha),
            lambda: 1.0,
            benchmark: Some(bench.clone()),
            constraints: ConstraintSet {
                per_stock_cap: Some(0.2),
                industry_neutral: true,
                size_band: Some(0.3),
                ..ConstraintSet::default()
            },
        };
        let sol = solve_portfolio(&problem, &QpTolerances::default()).unwrap();
        let w = &sol.weights;
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-8);
        for (i, &wi) in w.iter().enumerate() {
            assert!(wi >= -1e-8, "stock {i} short");
            assert!(wi <= 0.2 + 1e-8, "stock {i} over cap");
        }
        let values = snap.exposures.values();
        for j in snap.exposures.indices_of(FactorKind::Industry) {
            let active: f64 = (0..24).map(|i| values[[i, j]] * (w[i] - bench[i])).sum();
            assert!(active.abs() < 1e-8, "industry {j} active exposure {active}");
        }
        let sj = snap.exposures.factor_index("Size").unwrap();
        let size_active: f64 = (0..24).map(|i| values[[i, sj]] * (w[i] - bench[i])).sum();
        assert!(size_active.abs() <= 0.3 + 1e-8);
        assert!(sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn lambda_range_examples() {
        assert!((lambda_range(1.0, 0.25) - 2.0).abs() < 1e-15);
        assert_eq!(lambda_range(0.0, 0.1), 0.0);
        assert!((lambda_range(4.0, 0.05) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn random_feasible_points_never_beat_solver() {
        let snap = rich_snapshot(8, 2, 1, 99);
        let problem = PortfolioProblem {
            objective: Objective::MinRisk,
            weight_mode: WeightMode::Absolute,
            snapshot: &snap,
            alpha: None,
            lambda: 1.0,
            benchmark: None,
            constraints: ConstraintSet {
                per_stock_cap: Some(0.5),
                ..ConstraintSet::default()
            },
        };
        let sol = solve_portfolio(&problem, &QpTolerances::default()).unwrap();
        let mut next = lcg(1234);
        for _ in 0..10_000 {
            // Random point on the simplex respecting the cap.
            let raw: Vec<f64> = (0..8).map(|_| next().abs()).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            if w.iter().any(|&x| x > 0.5) {
                continue;
            }
            let v = snap.portfolio_variance(&w).unwrap();
            assert!(v + 1e-10 >= sol.predicted_risk);
        }
    }
}
