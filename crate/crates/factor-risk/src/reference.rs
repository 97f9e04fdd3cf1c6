//! Naive reference implementations used to cross-check the main code paths
//! in tests.
//!
//! Everything here is written as plain loops over the defining formulas and
//! shares no code with the production modules: dense Gaussian elimination
//! instead of QR, explicit weighted sums instead of incremental updates, and
//! brute-force active-set enumeration instead of the iterative QP solver.
//! Slow and simple on purpose.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Median of a slice by full sort (average of the two middle order
/// statistics for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Brute-force median-absolute-deviation clipping: values outside
/// median ± mult·MAD are set to the band edge; NaN entries pass through.
pub fn mad_clip(column: &[f64], mult: f64) -> Vec<f64> {
    let valid: Vec<f64> = column.iter().copied().filter(|x| x.is_finite()).collect();
    let med = median(&valid);
    let deviations: Vec<f64> = valid.iter().map(|x| (x - med).abs()).collect();
    let mad = median(&deviations);
    let lo = med - mult * mad;
    let hi = med + mult * mad;
    column
        .iter()
        .map(|&x| {
            if !x.is_finite() {
                x
            } else if x > hi {
                hi
            } else if x < lo {
                lo
            } else {
                x
            }
        })
        .collect()
}

/// Exponential decay weight for an observation `age` days old.
pub fn decay_weight(age: usize, half_life: f64) -> f64 {
    0.5f64.powf(age as f64 / half_life)
}

/// Naive exponentially weighted mean over valid entries. `series[i]` is the
/// observation `ages[i]` days old.
pub fn ewma_mean(series: &[f64], ages: &[usize], half_life: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &age) in series.iter().zip(ages) {
        if x.is_finite() {
            let w = decay_weight(age, half_life);
            num += w * x;
            den += w;
        }
    }
    num / den
}

/// Naive exponentially weighted covariance with per-series means and
/// pairwise-complete products.
pub fn ewma_cov(a: &[f64], b: &[f64], ages: &[usize], half_life: f64) -> f64 {
    let ma = ewma_mean(a, ages, half_life);
    let mb = ewma_mean(b, ages, half_life);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        if a[i].is_finite() && b[i].is_finite() {
            let w = decay_weight(ages[i], half_life);
            num += w * (a[i] - ma) * (b[i] - mb);
            den += w;
        }
    }
    num / den
}

/// Naive lag-d weighted autocovariance matrix of a T×K panel (rows oldest
/// first). Pair (t, t+d) carries the decay weight of the later observation.
pub fn autocov_lag(panel: ArrayView2<'_, f64>, d: usize, half_life: f64) -> Array2<f64> {
    let (t_len, k) = panel.dim();
    let mut means = vec![0.0; k];
    for j in 0..k {
        let col: Vec<f64> = panel.column(j).to_vec();
        let ages: Vec<usize> = (0..t_len).map(|t| t_len - 1 - t).collect();
        means[j] = ewma_mean(&col, &ages, half_life);
    }
    let mut out = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let mut num = 0.0;
            let mut den = 0.0;
            for t in 0..t_len.saturating_sub(d) {
                let x = panel[[t, a]];
                let y = panel[[t + d, b]];
                if x.is_finite() && y.is_finite() {
                    let age = t_len - 1 - (t + d);
                    let w = decay_weight(age, half_life);
                    num += w * (x - means[a]) * (y - means[b]);
                    den += w;
                }
            }
            out[[a, b]] = num / den;
        }
    }
    out
}

/// Direct evaluation of the Bartlett-weighted serial-correlation adjustment
/// with monthly scaling.
pub fn newey_west(
    raw: ArrayView2<'_, f64>,
    lags: &[Array2<f64>],
    monthly_scale: f64,
) -> Array2<f64> {
    let k = raw.nrows();
    let d_max = lags.len();
    let mut out = raw.to_owned();
    for (idx, lag) in lags.iter().enumerate() {
        let d = idx + 1;
        let w = 1.0 - d as f64 / (d_max as f64 + 1.0);
        for i in 0..k {
            for j in 0..k {
                out[[i, j]] += w * (lag[[i, j]] + lag[[j, i]]);
            }
        }
    }
    out.mapv_inplace(|x| x * monthly_scale);
    // Force exact symmetry the same way a careful hand computation would.
    for i in 0..k {
        for j in i + 1..k {
            let s = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    out
}

/// Dense Gaussian elimination with partial pivoting; None on singular
/// systems. Reference use only.
pub fn try_gauss_solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.to_owned();
    let mut r = b.to_owned();
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[[i, k]].abs() > m[[piv, k]].abs() {
                piv = i;
            }
        }
        if m[[piv, k]].abs() < 1e-300 {
            return None;
        }
        if piv != k {
            for j in 0..n {
                m.swap([k, j], [piv, j]);
            }
            r.swap(k, piv);
        }
        for i in k + 1..n {
            let f = m[[i, k]] / m[[k, k]];
            for j in k..n {
                let mkj = m[[k, j]];
                m[[i, j]] -= f * mkj;
            }
            let rk = r[k];
            r[i] -= f * rk;
        }
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = r[i];
        for j in i + 1..n {
            s -= m[[i, j]] * x[j];
        }
        x[i] = s / m[[i, i]];
    }
    Some(x)
}

/// Dense Gaussian elimination; panics on singular systems.
pub fn gauss_solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    try_gauss_solve(a, b).expect("singular system in reference gauss_solve")
}

/// Weighted least squares through the explicit normal equations
/// (XᵀWX)⁻¹XᵀWy.
pub fn wls_normal_equations(
    design: ArrayView2<'_, f64>,
    target: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let (m, n) = design.dim();
    let mut xtwx = Array2::zeros((n, n));
    let mut xtwy = Array1::zeros(n);
    for i in 0..m {
        let w = weights[i];
        for a in 0..n {
            xtwy[a] += w * design[[i, a]] * target[i];
            for b in 0..n {
                xtwx[[a, b]] += w * design[[i, a]] * design[[i, b]];
            }
        }
    }
    gauss_solve(xtwx.view(), xtwy.view())
}

/// Equality-constrained weighted least squares via the KKT system:
/// minimize Σ wₙ(yₙ − xₙᵀβ)² subject to cᵀβ = 0.
///
/// The full design here includes every column (country, industries, styles);
/// the constraint row makes the system determinate.
pub fn constrained_wls_kkt(
    design: ArrayView2<'_, f64>,
    target: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    constraint: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let (m, n) = design.dim();
    let mut kkt = Array2::zeros((n + 1, n + 1));
    let mut rhs = Array1::zeros(n + 1);
    for i in 0..m {
        let w = weights[i];
        for a in 0..n {
            rhs[a] += 2.0 * w * design[[i, a]] * target[i];
            for b in 0..n {
                kkt[[a, b]] += 2.0 * w * design[[i, a]] * design[[i, b]];
            }
        }
    }
    for a in 0..n {
        kkt[[a, n]] = constraint[a];
        kkt[[n, a]] = constraint[a];
    }
    let sol = gauss_solve(kkt.view(), rhs.view());
    sol.slice(ndarray::s![..n]).to_owned()
}

/// Dense portfolio variance wᵀ(XFXᵀ + diag(δ))w materializing the full
/// stock-covariance matrix.
pub fn dense_portfolio_variance(
    exposures: ArrayView2<'_, f64>,
    factor_cov: ArrayView2<'_, f64>,
    idio_var: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
) -> f64 {
    let n = exposures.nrows();
    let xf = exposures.dot(&factor_cov);
    let mut v = xf.dot(&exposures.t());
    for i in 0..n {
        v[[i, i]] += idio_var[i];
    }
    let vw = v.dot(&weights);
    weights.dot(&vw)
}

/// A quadratic program in explicit dense form for the enumeration oracle:
/// minimize ½xᵀHx + gᵀx subject to Ax = b and Cx ≤ d.
#[derive(Debug, Clone)]
pub struct DenseQp {
    pub hessian: Array2<f64>,
    pub linear: Array1<f64>,
    pub eq_lhs: Array2<f64>,
    pub eq_rhs: Array1<f64>,
    pub ineq_lhs: Array2<f64>,
    pub ineq_rhs: Array1<f64>,
}

/// Drop linearly dependent equality rows by modified Gram-Schmidt on the
/// row space (their right-hand sides are assumed consistent, which holds
/// for rows built from one constraint family, e.g. budget = Σ industries).
fn independent_eq_rows(eq_lhs: &Array2<f64>, eq_rhs: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
    let (m, n) = eq_lhs.dim();
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut keep = Vec::new();
    for r in 0..m {
        let mut v = eq_lhs.row(r).to_owned();
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in &basis {
            let proj = v.dot(b);
            v.scaled_add(-proj, b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 * (1.0 + scale) {
            basis.push(v.mapv(|x| x / norm));
            keep.push(r);
        }
    }
    let mut lhs = Array2::zeros((keep.len(), n));
    let mut rhs = Array1::zeros(keep.len());
    for (i, &r) in keep.iter().enumerate() {
        lhs.row_mut(i).assign(&eq_lhs.row(r));
        rhs[i] = eq_rhs[r];
    }
    (lhs, rhs)
}

/// Globally solve a small convex QP by enumerating candidate active sets.
///
/// Dependent equality rows (a budget row alongside a full set of industry
/// rows, say) are reduced away first. Every subset of inequality rows (up to
/// `n` of them) is then pinned to equality in turn; the resulting KKT system
/// is solved directly and the candidate is accepted when it is primal
/// feasible with nonnegative multipliers on the pinned rows. Convexity makes
/// any such point a global minimizer. Returns `(x, objective)` or None when
/// no candidate verifies (infeasible within the enumeration's reach).
pub fn solve_qp_enumerate(qp: &DenseQp, feas_tol: f64) -> Option<(Array1<f64>, f64)> {
    let n = qp.linear.len();
    let m_in = qp.ineq_rhs.len();
    let (eq_lhs, eq_rhs) = independent_eq_rows(&qp.eq_lhs, &qp.eq_rhs);
    let qp = DenseQp {
        hessian: qp.hessian.clone(),
        linear: qp.linear.clone(),
        eq_lhs,
        eq_rhs,
        ineq_lhs: qp.ineq_lhs.clone(),
        ineq_rhs: qp.ineq_rhs.clone(),
    };
    let qp = &qp;
    let mut best: Option<(Array1<f64>, f64)> = None;

    let mut subset: Vec<usize> = Vec::new();
    enumerate_subsets(m_in, n, &mut subset, &mut |active: &[usize]| {
        if let Some((x, mults)) = solve_kkt_candidate(qp, active) {
            // Primal feasibility of every constraint.
            for r in 0..qp.eq_rhs.len() {
                let lhs: f64 = (0..n).map(|j| qp.eq_lhs[[r, j]] * x[j]).sum();
                if (lhs - qp.eq_rhs[r]).abs() > feas_tol {
                    return;
                }
            }
            for r in 0..m_in {
                let lhs: f64 = (0..n).map(|j| qp.ineq_lhs[[r, j]] * x[j]).sum();
                if lhs - qp.ineq_rhs[r] > feas_tol {
                    return;
                }
            }
            // Dual feasibility on pinned rows.
            if mults.iter().any(|&u| u < -feas_tol) {
                return;
            }
            let obj = objective(qp, &x);
            match &best {
                Some((_, b)) if *b <= obj => {}
                _ => best = Some((x, obj)),
            }
        }
    });
    best
}

fn objective(qp: &DenseQp, x: &Array1<f64>) -> f64 {
    let hx = qp.hessian.dot(x);
    0.5 * x.dot(&hx) + qp.linear.dot(x)
}

fn enumerate_subsets(
    m: usize,
    max_size: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    fn rec(
        start: usize,
        m: usize,
        max_size: usize,
        current: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        visit(current);
        if current.len() == max_size {
            return;
        }
        for i in start..m {
            current.push(i);
            rec(i + 1, m, max_size, current, visit);
            current.pop();
        }
    }
    rec(0, m, max_size, current, visit);
}

/// Solve the KKT system with the given inequality rows pinned active.
/// Returns the primal point and the multipliers of the pinned rows, or None
/// when the system is singular.
fn solve_kkt_candidate(qp: &DenseQp, active: &[usize]) -> Option<(Array1<f64>, Vec<f64>)> {
    let n = qp.linear.len();
    let me = qp.eq_rhs.len();
    let ma = active.len();
    let dim = n + me + ma;
    let mut kkt = Array2::zeros((dim, dim));
    let mut rhs = Array1::zeros(dim);
    for i in 0..n {
        for j in 0..n {
            kkt[[i, j]] = qp.hessian[[i, j]];
        }
        rhs[i] = -qp.linear[i];
    }
    for r in 0..me {
        for j in 0..n {
            kkt[[j, n + r]] = qp.eq_lhs[[r, j]];
            kkt[[n + r, j]] = qp.eq_lhs[[r, j]];
        }
        rhs[n + r] = qp.eq_rhs[r];
    }
    for (k, &r) in active.iter().enumerate() {
        for j in 0..n {
            kkt[[j, n + me + k]] = qp.ineq_lhs[[r, j]];
            kkt[[n + me + k, j]] = qp.ineq_lhs[[r, j]];
        }
        rhs[n + me + k] = qp.ineq_rhs[r];
    }
    let sol = try_gauss_solve(kkt.view(), rhs.view())?;
    if sol.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let x = sol.slice(ndarray::s![..n]).to_owned();
    let mults = (0..ma).map(|k| sol[n + me + k]).collect();
    Some((x, mults))
}

/// Sample standard deviation with the (n−1) convention.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n as f64 - 1.0)).sqrt()
}

/// Quantile by linear interpolation on sorted order statistics
/// (the `q·(n−1)` positional convention).
pub fn quantile_linear(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        let frac = pos - lo as f64;
        v[lo] * (1.0 - frac) + v[hi] * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 100.0]), 2.5);
    }

    #[test]
    fn mad_clip_spec_example() {
        // [1, 2, 3, 100]: median 2.5, MAD 1.0, band [-0.5, 5.5].
        let out = mad_clip(&[1.0, 2.0, 3.0, 100.0], 3.0);
        assert_eq!(out, vec![1.0, 2.0, 3.0, 5.5]);
    }

    #[test]
    fn gauss_solves_small_system() {
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        let b = array![9.0, 8.0];
        let x = gauss_solve(a.view(), b.view());
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_solves_inverse_variance_toy() {
        // min wᵀ diag(1,4) w  s.t. Σw = 1, w ≥ 0 → w = [0.8, 0.2].
        let qp = DenseQp {
            hessian: array![[2.0, 0.0], [0.0, 8.0]],
            linear: array![0.0, 0.0],
            eq_lhs: array![[1.0, 1.0]],
            eq_rhs: array![1.0],
            ineq_lhs: array![[-1.0, 0.0], [0.0, -1.0]],
            ineq_rhs: array![0.0, 0.0],
        };
        let (x, _) = solve_qp_enumerate(&qp, 1e-9).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-10);
        assert!((x[1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile_linear(&v, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile_linear(&v, 0.75) - 3.25).abs() < 1e-12);
    }
}
