//! Primal active-set solver for convex quadratic programs.
//!
//! Handles the canonical form
//!
//! ```text
//!     minimize   ½ xᵀH x + gᵀx
//!     subject to aᵀx = b          (equality rows)
//!                lb ≤ x ≤ ub      (boxes, ±∞ allowed)
//!                aᵀx ≤ b          (general inequality rows)
//! ```
//!
//! with H positive semi-definite, supplied in the factored form
//! scale·(XFXᵀ + diag(δ)) so applying H costs O(N·K). The zero-Hessian case
//! (a linear program) and the semi-definite case are handled through rank
//! detection on the reduced Hessian: curvature-free descent directions are
//! followed to the nearest blocking constraint, simplex-fashion. All ties
//! break toward the lowest constraint index, making solves deterministic.

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::linalg::{PivotedCholesky, PivotedQr};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("problem is infeasible: {detail}")]
    Infeasible { detail: String },

    #[error("iteration limit {limit} reached")]
    MaxIterations { limit: usize },

    #[error("objective is unbounded below along a feasible ray")]
    Unbounded,
}

impl SolverError {
    pub fn code(&self) -> &'static str {
        match self {
            SolverError::Infeasible { .. } => "Infeasible",
            SolverError::MaxIterations { .. } => "MaxIterations",
            SolverError::Unbounded => "Unbounded",
        }
    }
}

/// H = scale · (X F Xᵀ + diag(δ)). A zero-column X with zero δ and any scale
/// represents the zero Hessian.
#[derive(Debug, Clone)]
pub struct FactoredHessian {
    exposures: Array2<f64>,
    factor_cov: Array2<f64>,
    delta: Array1<f64>,
    scale: f64,
}

impl FactoredHessian {
    pub fn new(
        exposures: Array2<f64>,
        factor_cov: Array2<f64>,
        delta: Array1<f64>,
        scale: f64,
    ) -> Self {
        assert_eq!(exposures.ncols(), factor_cov.nrows());
        assert_eq!(exposures.nrows(), delta.len());
        FactoredHessian {
            exposures,
            factor_cov,
            delta,
            scale,
        }
    }

    /// Zero Hessian of dimension n (linear programs).
    pub fn zero(n: usize) -> Self {
        FactoredHessian {
            exposures: Array2::zeros((n, 0)),
            factor_cov: Array2::zeros((0, 0)),
            delta: Array1::zeros(n),
            scale: 0.0,
        }
    }

    /// Pure diagonal Hessian (phase-1 problems).
    pub fn diagonal(delta: Array1<f64>) -> Self {
        let n = delta.len();
        FactoredHessian {
            exposures: Array2::zeros((n, 0)),
            factor_cov: Array2::zeros((0, 0)),
            delta,
            scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || (self.exposures.ncols() == 0 && self.delta.iter().all(|d| *d == 0.0))
    }

    pub fn apply(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        if self.scale == 0.0 {
            return Array1::zeros(self.dim());
        }
        let loadings = self.exposures.t().dot(&v);
        let mut out = self.exposures.dot(&self.factor_cov.dot(&loadings));
        for i in 0..self.dim() {
            out[i] += self.delta[i] * v[i];
            out[i] *= self.scale;
        }
        out
    }

    pub fn quad(&self, v: ArrayView1<'_, f64>) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let loadings = self.exposures.t().dot(&v);
        let factor_q = loadings.dot(&self.factor_cov.dot(&loadings));
        let idio_q: f64 = v
            .iter()
            .zip(self.delta.iter())
            .map(|(x, d)| x * x * d)
            .sum();
        self.scale * (factor_q + idio_q)
    }
}

/// A convex QP in canonical form.
#[derive(Debug, Clone)]
pub struct CanonicalQp {
    pub hessian: FactoredHessian,
    pub linear: Array1<f64>,
    pub eq: Vec<(Array1<f64>, f64)>,
    pub lb: Array1<f64>,
    pub ub: Array1<f64>,
    pub ineq: Vec<(Array1<f64>, f64)>,
}

/// Solver tolerances; all values are recorded in run manifests.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct QpTolerances {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl Default for QpTolerances {
    fn default() -> Self {
        QpTolerances {
            stationarity: 1e-6,
            feasibility: 1e-8,
            complementarity: 1e-8,
        }
    }
}

/// Raw solver output in the decision-variable space.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Stationarity residual ‖Hx + g + A_Wᵀμ‖∞.
    pub kkt_residual: f64,
    pub max_primal_violation: f64,
    pub max_complementarity: f64,
    /// Labels of the working constraints at the solution.
    pub active_constraints: Vec<Constraint>,
}

/// Identity of one working constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Equality(usize),
    General(usize),
    Lower(usize),
    Upper(usize),
}

impl Constraint {
    pub fn label(&self) -> String {
        match self {
            Constraint::Equality(i) => format!("eq[{i}]"),
            Constraint::General(i) => format!("ineq[{i}]"),
            Constraint::Lower(i) => format!("lower[{i}]"),
            Constraint::Upper(i) => format!("upper[{i}]"),
        }
    }

    /// Ordering index used for deterministic tie-breaking: general rows
    /// first, then lower bounds by variable, then upper bounds.
    fn order_key(&self, n_gen: usize, n_var: usize) -> usize {
        match self {
            Constraint::Equality(i) => *i,
            Constraint::General(i) => *i,
            Constraint::Lower(i) => n_gen + i,
            Constraint::Upper(i) => n_gen + n_var + i,
        }
    }
}

struct Workspace<'a> {
    qp: &'a CanonicalQp,
    n: usize,
}

impl<'a> Workspace<'a> {
    fn row(&self, c: Constraint) -> Array1<f64> {
        let mut r = Array1::zeros(self.n);
        match c {
            Constraint::Equality(i) => r.assign(&self.qp.eq[i].0),
            Constraint::General(i) => r.assign(&self.qp.ineq[i].0),
            Constraint::Lower(i) => r[i] = -1.0,
            Constraint::Upper(i) => r[i] = 1.0,
        }
        r
    }

    fn rhs(&self, c: Constraint) -> f64 {
        match c {
            Constraint::Equality(i) => self.qp.eq[i].1,
            Constraint::General(i) => self.qp.ineq[i].1,
            Constraint::Lower(i) => -self.qp.lb[i],
            Constraint::Upper(i) => self.qp.ub[i],
        }
    }

    /// Row dot product with a vector, without materializing box rows.
    fn row_dot(&self, c: Constraint, v: &Array1<f64>) -> f64 {
        match c {
            Constraint::Equality(i) => self.qp.eq[i].0.dot(v),
            Constraint::General(i) => self.qp.ineq[i].0.dot(v),
            Constraint::Lower(i) => -v[i],
            Constraint::Upper(i) => v[i],
        }
    }

    /// Slack b − aᵀx of an inequality-oriented constraint (≥ 0 feasible).
    fn slack(&self, c: Constraint, x: &Array1<f64>) -> f64 {
        self.rhs(c) - self.row_dot(c, x)
    }

    fn all_inequalities(&self) -> Vec<Constraint> {
        let mut v: Vec<Constraint> = (0..self.qp.ineq.len()).map(Constraint::General).collect();
        for i in 0..self.n {
            if self.qp.lb[i].is_finite() {
                v.push(Constraint::Lower(i));
            }
        }
        for i in 0..self.n {
            if self.qp.ub[i].is_finite() {
                v.push(Constraint::Upper(i));
            }
        }
        v
    }
}

/// Maximum primal violation of `x` over every constraint of the problem.
pub fn max_violation(qp: &CanonicalQp, x: &Array1<f64>) -> f64 {
    let ws = Workspace { qp, n: x.len() };
    let mut worst = 0.0f64;
    for i in 0..qp.eq.len() {
        worst = worst.max((ws.row_dot(Constraint::Equality(i), x) - qp.eq[i].1).abs());
    }
    for c in ws.all_inequalities() {
        worst = worst.max(-ws.slack(c, x).min(0.0));
    }
    worst
}

/// Solve the QP from a feasible starting point.
pub fn solve_from(
    qp: &CanonicalQp,
    x0: Array1<f64>,
    tol: &QpTolerances,
) -> Result<RawSolution, SolverError> {
    let n = qp.linear.len();
    let ws = Workspace { qp, n };
    debug_assert!(max_violation(qp, &x0) <= 10.0 * tol.feasibility);

    let mut x = x0;
    let max_iter = (10 * n).max(100);
    let n_gen = qp.ineq.len();

    // Working set: all equality rows, plus inequalities exactly active at the
    // start that keep the row set independent.
    let mut working: Vec<Constraint> = (0..qp.eq.len()).map(Constraint::Equality).collect();
    {
        let mut rows: Vec<Array1<f64>> = working.iter().map(|&c| ws.row(c)).collect();
        for c in ws.all_inequalities() {
            if ws.slack(c, &x).abs() <= tol.feasibility {
                rows.push(ws.row(c));
                if qr_rank(&rows, n) == rows.len() {
                    working.push(c);
                } else {
                    rows.pop();
                }
            }
        }
    }

    let mut iterations = 0usize;
    loop {
        if iterations >= max_iter {
            return Err(SolverError::MaxIterations { limit: max_iter });
        }
        iterations += 1;

        let grad = {
            let mut g = qp.hessian.apply(x.view());
            g += &qp.linear;
            g
        };

        // QR of A_Wᵀ for null space and multipliers.
        let m_w = working.len();
        let mut awt = Array2::zeros((n, m_w));
        for (j, &c) in working.iter().enumerate() {
            awt.column_mut(j).assign(&ws.row(c));
        }
        let qr = PivotedQr::decompose(awt.view(), 1e-12);
        let z = qr.orthogonal_complement();
        let n_free = z.ncols();

        // Direction on the current face.
        let mut direction: Option<(Array1<f64>, bool)> = None; // (p, is_ray)
        if n_free > 0 {
            let rg = z.t().dot(&grad);
            if qp.hessian.is_zero() {
                // Linear program: follow the negative projected gradient.
                let norm = rg.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > tol.stationarity * 1e-3 {
                    direction = Some((z.dot(&rg.mapv(|v| -v / norm)), true));
                }
            } else {
                let hz = {
                    let mut m = Array2::zeros((n, n_free));
                    for j in 0..n_free {
                        m.column_mut(j).assign(&qp.hessian.apply(z.column(j)));
                    }
                    m
                };
                let rh = z.t().dot(&hz);
                let chol = PivotedCholesky::decompose(rh.view(), 1e-12);
                let neg_rg = rg.mapv(|v| -v);
                let pz = chol.solve_range(neg_rg.view());
                if chol.is_positive_definite() {
                    let p = z.dot(&pz);
                    direction = Some((p, false));
                } else {
                    // Semi-definite face: split the reduced gradient into a
                    // range part (Newton step) and a null part (free descent).
                    let residual = rh.dot(&pz) + &rg;
                    let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if res_norm > 1e-10 * (1.0 + rg.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                        let ray = z.dot(&residual.mapv(|v| -v / res_norm));
                        direction = Some((ray, true));
                    } else {
                        let p = z.dot(&pz);
                        direction = Some((p, false));
                    }
                }
            }
        }

        let step_scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let stepping = match &direction {
            Some((p, is_ray)) => {
                let p_norm = p.iter().map(|v| v.abs()).fold(0.0, f64::max);
                if *is_ray {
                    p_norm > 0.0
                } else {
                    p_norm > 1e-13 * step_scale
                }
            }
            None => false,
        };

        if !stepping {
            // Stationary on the current face: check multipliers.
            let neg_grad = grad.mapv(|v| -v);
            let mu = qr.solve_least_squares(neg_grad.view());
            let grad_scale = 1.0 + grad.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let drop_tol = 1e-11 * grad_scale;
            let mut worst: Option<(usize, f64)> = None;
            for (j, &c) in working.iter().enumerate() {
                if matches!(c, Constraint::Equality(_)) {
                    continue;
                }
                let m = mu[j];
                if m < -drop_tol {
                    let better = match worst {
                        None => true,
                        Some((wj, wm)) => {
                            m < wm - 1e-15
                                || (m <= wm + 1e-15
                                    && c.order_key(n_gen, n) < working[wj].order_key(n_gen, n))
                        }
                    };
                    if better {
                        worst = Some((j, m));
                    }
                }
            }
            match worst {
                Some((j, _)) => {
                    working.remove(j);
                    continue;
                }
                None => {
                    // Optimal: assemble diagnostics.
                    let mut stat = grad.clone();
                    for (j, &c) in working.iter().enumerate() {
                        let row = ws.row(c);
                        for i in 0..n {
                            stat[i] += mu[j] * row[i];
                        }
                    }
                    let kkt_residual = stat.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    let max_primal_violation = max_violation(qp, &x);
                    let mut max_comp = 0.0f64;
                    for (j, &c) in working.iter().enumerate() {
                        if !matches!(c, Constraint::Equality(_)) {
                            max_comp = max_comp.max((mu[j] * ws.slack(c, &x)).abs());
                        }
                    }
                    let objective = 0.5 * qp.hessian.quad(x.view()) + qp.linear.dot(&x);
                    return Ok(RawSolution {
                        x,
                        objective,
                        iterations,
                        kkt_residual,
                        max_primal_violation,
                        max_complementarity: max_comp,
                        active_constraints: working.clone(),
                    });
                }
            }
        }

        let (p, is_ray) = direction.expect("stepping implies a direction");

        // Longest feasible step along p; ties on the blocking constraint
        // break toward the lowest constraint index.
        let mut alpha_max = f64::INFINITY;
        let mut blocking: Option<Constraint> = None;
        for c in ws.all_inequalities() {
            if working.contains(&c) {
                continue;
            }
            let ap = ws.row_dot(c, &p);
            if ap > 1e-13 {
                let slack = ws.slack(c, &x).max(0.0);
                let a = slack / ap;
                let take = match blocking {
                    None => a < alpha_max,
                    Some(b) => {
                        a < alpha_max - 1e-12
                            || (a < alpha_max + 1e-12
                                && c.order_key(n_gen, n) < b.order_key(n_gen, n))
                    }
                };
                if take {
                    alpha_max = a.min(alpha_max);
                    blocking = Some(c);
                }
            }
        }

        if is_ray {
            match blocking {
                None => return Err(SolverError::Unbounded),
                Some(c) => {
                    x.scaled_add(alpha_max, &p);
                    working.push(c);
                }
            }
        } else {
            let alpha = alpha_max.min(1.0);
            x.scaled_add(alpha, &p);
            if alpha < 1.0 {
                working.push(blocking.expect("alpha < 1 implies a blocking constraint"));
            }
        }
    }
}

fn qr_rank(rows: &[Array1<f64>], n: usize) -> usize {
    let mut m = Array2::zeros((n, rows.len()));
    for (j, r) in rows.iter().enumerate() {
        m.column_mut(j).assign(r);
    }
    PivotedQr::decompose(m.view(), 1e-12).rank()
}

/// Find a feasible point: try the supplied candidates, then fall back to a
/// phase-1 problem minimizing squared artificial slacks.
pub fn find_feasible(
    qp: &CanonicalQp,
    candidates: &[Array1<f64>],
    tol: &QpTolerances,
) -> Result<Array1<f64>, SolverError> {
    for c in candidates {
        if max_violation(qp, c) <= tol.feasibility {
            return Ok(c.clone());
        }
    }

    // Phase 1 over (x, t): minimize ½‖t‖² with elastic equalities
    // aᵀx + t = b and elasticized general rows aᵀx − t ≤ b, t ≥ 0.
    let n = qp.linear.len();
    let m_eq = qp.eq.len();
    let m_in = qp.ineq.len();
    let dim = n + m_eq + m_in;

    let mut delta = Array1::zeros(dim);
    for i in n..dim {
        delta[i] = 1.0;
    }
    let hessian = FactoredHessian::diagonal(delta);
    let linear = Array1::zeros(dim);

    let mut eq = Vec::with_capacity(m_eq);
    for (i, (a, b)) in qp.eq.iter().enumerate() {
        let mut row = Array1::zeros(dim);
        for j in 0..n {
            row[j] = a[j];
        }
        row[n + i] = 1.0;
        eq.push((row, *b));
    }

    let mut ineq = Vec::with_capacity(m_in);
    for (i, (a, b)) in qp.ineq.iter().enumerate() {
        let mut row = Array1::zeros(dim);
        for j in 0..n {
            row[j] = a[j];
        }
        row[n + m_eq + i] = -1.0;
        ineq.push((row, *b));
    }

    let mut lb = Array1::from_elem(dim, f64::NEG_INFINITY);
    let mut ub = Array1::from_elem(dim, f64::INFINITY);
    for j in 0..n {
        lb[j] = qp.lb[j];
        ub[j] = qp.ub[j];
    }
    for i in 0..m_in {
        lb[n + m_eq + i] = 0.0;
    }

    let phase1 = CanonicalQp {
        hessian,
        linear,
        eq,
        lb,
        ub,
        ineq,
    };

    // Feasible start for phase 1 by construction.
    let mut x0 = Array1::zeros(dim);
    for j in 0..n {
        x0[j] = 0.0f64.clamp(
            if qp.lb[j].is_finite() {
                qp.lb[j]
            } else {
                f64::NEG_INFINITY
            },
            if qp.ub[j].is_finite() {
                qp.ub[j]
            } else {
                f64::INFINITY
            },
        );
    }
    for (i, (a, b)) in qp.eq.iter().enumerate() {
        let ax: f64 = (0..n).map(|j| a[j] * x0[j]).sum();
        x0[n + i] = b - ax;
    }
    for (i, (a, b)) in qp.ineq.iter().enumerate() {
        let ax: f64 = (0..n).map(|j| a[j] * x0[j]).sum();
        x0[n + m_eq + i] = (ax - b).max(0.0);
    }

    let sol = solve_from(&phase1, x0, tol)?;
    let t_norm = (n..dim).map(|i| sol.x[i].abs()).fold(0.0, f64::max);
    if t_norm > 100.0 * tol.feasibility {
        return Err(SolverError::Infeasible {
            detail: format!("phase-1 residual {t_norm:.3e}"),
        });
    }
    let x = sol.x.slice(ndarray::s![..n]).to_owned();
    if max_violation(qp, &x) > 100.0 * tol.feasibility {
        return Err(SolverError::Infeasible {
            detail: format!(
                "phase-1 point violates constraints by {:.3e}",
                max_violation(qp, &x)
            ),
        });
    }
    Ok(x)
}

/// Full solve: feasibility phase then active-set iterations.
pub fn solve(
    qp: &CanonicalQp,
    candidates: &[Array1<f64>],
    tol: &QpTolerances,
) -> Result<RawSolution, SolverError> {
    let x0 = find_feasible(qp, candidates, tol)?;
    solve_from(qp, x0, tol)
}
