//! Dense linear-algebra kernels shared across the crate.
//!
//! Three primitives cover every numeric need of the model:
//! column-pivoted Householder QR (rank-revealing least squares and
//! null-space bases), diagonally pivoted Cholesky for positive
//! semi-definite systems, and a cyclic Jacobi eigensolver for symmetric
//! matrices. All routines are deterministic: pivot ties break toward the
//! lowest index and no randomization is used anywhere.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Relative tolerance for rank decisions in pivoted factorizations.
pub const RANK_TOL: f64 = 1e-10;

/// Column-pivoted Householder QR factorization of an m×n matrix.
///
/// Stores the factored matrix compactly: the upper triangle holds R (in
/// pivoted column order), the strict lower part holds the Householder
/// vectors with implicit unit leading entry.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    qr: Array2<f64>,
    beta: Vec<f64>,
    /// `perm[j]` = original index of the j-th pivoted column.
    perm: Vec<usize>,
    rank: usize,
    rows: usize,
    cols: usize,
}

impl PivotedQr {
    /// Factor `a` with column pivoting. Columns whose remaining norm falls
    /// below `rel_tol` times the first pivot norm are treated as dependent.
    pub fn decompose(a: ArrayView2<'_, f64>, rel_tol: f64) -> Self {
        let (m, n) = a.dim();
        let mut qr = a.to_owned();
        let mut beta = Vec::with_capacity(n.min(m));
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rank = 0;
        let mut first_pivot_norm = 0.0f64;

        let kmax = m.min(n);
        for k in 0..kmax {
            // Rescan remaining column norms; O(mn) per step is fine at the
            // sizes this crate handles and avoids norm-downdate drift.
            let mut best = k;
            let mut best_sq = -1.0f64;
            for j in k..n {
                let mut s = 0.0;
                for i in k..m {
                    s += qr[[i, j]] * qr[[i, j]];
                }
                if s > best_sq {
                    best_sq = s;
                    best = j;
                }
            }
            let col_norm = best_sq.max(0.0).sqrt();
            if k == 0 {
                first_pivot_norm = col_norm;
            }
            if col_norm <= rel_tol * first_pivot_norm || col_norm == 0.0 {
                break;
            }
            if best != k {
                for i in 0..m {
                    qr.swap([i, k], [i, best]);
                }
                perm.swap(k, best);
            }

            // Householder reflector annihilating rows k+1..m of column k.
            let x0 = qr[[k, k]];
            let sigma = if x0 >= 0.0 { 1.0 } else { -1.0 };
            let norm = col_norm;
            let v0 = x0 + sigma * norm;
            // v0 == 0 only when the whole subcolumn is zero, excluded above.
            let b = (x0.abs() + norm) / norm;
            qr[[k, k]] = -sigma * norm;
            for i in k + 1..m {
                qr[[i, k]] /= v0;
            }
            beta.push(b);
            // Apply the reflector to the trailing columns.
            for j in k + 1..n {
                let mut w = qr[[k, j]];
                for i in k + 1..m {
                    w += qr[[i, k]] * qr[[i, j]];
                }
                w *= b;
                qr[[k, j]] -= w;
                for i in k + 1..m {
                    let vik = qr[[i, k]];
                    qr[[i, j]] -= w * vik;
                }
            }
            rank = k + 1;
        }

        PivotedQr {
            qr,
            beta,
            perm,
            rank,
            rows: m,
            cols: n,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Apply Qᵀ to a length-m vector in place.
    pub fn apply_qt(&self, v: &mut Array1<f64>) {
        debug_assert_eq!(v.len(), self.rows);
        for k in 0..self.rank {
            let mut w = v[k];
            for i in k + 1..self.rows {
                w += self.qr[[i, k]] * v[i];
            }
            w *= self.beta[k];
            v[k] -= w;
            for i in k + 1..self.rows {
                let vik = self.qr[[i, k]];
                v[i] -= w * vik;
            }
        }
    }

    /// Apply Q to a length-m vector in place.
    pub fn apply_q(&self, v: &mut Array1<f64>) {
        debug_assert_eq!(v.len(), self.rows);
        for k in (0..self.rank).rev() {
            let mut w = v[k];
            for i in k + 1..self.rows {
                w += self.qr[[i, k]] * v[i];
            }
            w *= self.beta[k];
            v[k] -= w;
            for i in k + 1..self.rows {
                let vik = self.qr[[i, k]];
                v[i] -= w * vik;
            }
        }
    }

    /// Minimum-residual solution of `a x = b` with zeros on columns dropped
    /// by the rank decision (a valid least-squares solution).
    pub fn solve_least_squares(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        debug_assert_eq!(b.len(), self.rows);
        let mut y = b.to_owned();
        self.apply_qt(&mut y);
        let r = self.rank;
        let mut xp = Array1::zeros(self.cols);
        for j in (0..r).rev() {
            let mut s = y[j];
            for l in j + 1..r {
                s -= self.qr[[j, l]] * xp[l];
            }
            xp[j] = s / self.qr[[j, j]];
        }
        let mut x = Array1::zeros(self.cols);
        for j in 0..r {
            x[self.perm[j]] = xp[j];
        }
        x
    }

    /// Orthonormal basis of the orthogonal complement of the column space:
    /// the trailing m−rank columns of Q. For a factorization of Aᵀ this is a
    /// null-space basis of A.
    pub fn orthogonal_complement(&self) -> Array2<f64> {
        let m = self.rows;
        let r = self.rank;
        let mut z = Array2::zeros((m, m - r));
        for (jz, j) in (r..m).enumerate() {
            let mut e = Array1::zeros(m);
            e[j] = 1.0;
            self.apply_q(&mut e);
            z.column_mut(jz).assign(&e);
        }
        z
    }
}

/// Weighted least squares via row scaling and pivoted QR.
///
/// Solves min Σ wᵢ (yᵢ − xᵢᵀβ)² and returns the coefficient vector along
/// with the rank of the weighted design matrix.
pub fn weighted_least_squares(
    design: ArrayView2<'_, f64>,
    target: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
) -> (Array1<f64>, usize) {
    let (m, n) = design.dim();
    debug_assert_eq!(target.len(), m);
    debug_assert_eq!(weights.len(), m);
    let mut a = Array2::zeros((m, n));
    let mut b = Array1::zeros(m);
    for i in 0..m {
        let s = weights[i].max(0.0).sqrt();
        for j in 0..n {
            a[[i, j]] = s * design[[i, j]];
        }
        b[i] = s * target[i];
    }
    let qr = PivotedQr::decompose(a.view(), RANK_TOL);
    let beta = qr.solve_least_squares(b.view());
    (beta, qr.rank())
}

/// Diagonally pivoted Cholesky factorization of a symmetric PSD matrix.
///
/// Produces P A Pᵀ = L Lᵀ up to the detected rank; trailing pivots below
/// tolerance are treated as zero.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    l: Array2<f64>,
    perm: Vec<usize>,
    rank: usize,
    n: usize,
}

impl PivotedCholesky {
    pub fn decompose(a: ArrayView2<'_, f64>, rel_tol: f64) -> Self {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut w = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rank = 0;
        let first_max = (0..n).map(|i| a[[i, i]]).fold(0.0f64, f64::max);

        for k in 0..n {
            let mut best = k;
            let mut best_d = f64::NEG_INFINITY;
            for j in k..n {
                if w[[j, j]] > best_d {
                    best_d = w[[j, j]];
                    best = j;
                }
            }
            if best_d <= rel_tol * first_max || best_d <= 0.0 {
                break;
            }
            if best != k {
                for i in 0..n {
                    w.swap([i, k], [i, best]);
                }
                for j in 0..n {
                    w.swap([k, j], [best, j]);
                }
                perm.swap(k, best);
            }
            let d = w[[k, k]].sqrt();
            w[[k, k]] = d;
            for i in k + 1..n {
                w[[i, k]] /= d;
            }
            for j in k + 1..n {
                for i in j..n {
                    let lj = w[[j, k]];
                    let li = w[[i, k]];
                    w[[i, j]] -= li * lj;
                    if i != j {
                        w[[j, i]] = w[[i, j]];
                    }
                }
            }
            rank = k + 1;
        }

        PivotedCholesky {
            l: w,
            perm,
            rank,
            n,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_positive_definite(&self) -> bool {
        self.rank == self.n
    }

    /// Solve A x = b on the range of A. For a rank-deficient PSD matrix the
    /// returned x satisfies A x = projection of b onto range(A); the caller
    /// can detect a null-space component from the residual.
    pub fn solve_range(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let r = self.rank;
        let mut bp = Array1::zeros(self.n);
        for i in 0..self.n {
            bp[i] = b[self.perm[i]];
        }
        // Forward substitution on the leading r×r block.
        let mut y = Array1::zeros(r);
        for i in 0..r {
            let mut s = bp[i];
            for j in 0..i {
                s -= self.l[[i, j]] * y[j];
            }
            y[i] = s / self.l[[i, i]];
        }
        // Back substitution.
        let mut xp = Array1::zeros(self.n);
        for i in (0..r).rev() {
            let mut s = y[i];
            for j in i + 1..r {
                s -= self.l[[j, i]] * xp[j];
            }
            xp[i] = s / self.l[[i, i]];
        }
        let mut x = Array1::zeros(self.n);
        for i in 0..self.n {
            x[self.perm[i]] = xp[i];
        }
        x
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching eigenvectors as
/// columns. Quadratic convergence makes a handful of sweeps sufficient at
/// factor-model sizes (K ≲ 50).
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.to_owned();
    // Symmetrize defensively so tiny asymmetries cannot stall convergence.
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = s;
            m[[j, i]] = s;
        }
    }
    let mut v = Array2::eye(n);
    let max_sweeps = 64;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        let scale = (0..n).map(|i| m[[i, i]].abs()).fold(0.0f64, f64::max);
        if off.sqrt() <= f64::EPSILON * (scale + 1e-300) * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let mut vals = Array1::zeros(n);
    let mut vecs = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        vals[k] = m[[i, i]];
        vecs.column_mut(k).assign(&v.column(i));
    }
    (vals, vecs)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(a: ArrayView2<'_, f64>) -> (f64, f64) {
    let (vals, _) = symmetric_eigen(a);
    (vals[0], vals[vals.len() - 1])
}
