//! Small dense QP with box bounds and quadratically penalized soft rows.
//!
//! ```text
//!     minimize    1/2 u' H u + f' u + c  +  rho * sum_i viol_i(u)^2
//!     subject to  lb <= u <= ub
//!     viol_i(u) = max(0, lo_i - g_i u) + max(0, g_i u - hi_i)
//! ```
//!
//! The box problem is solved by a primal active-set method; soft rows are
//! turned into extra box-constrained variables (see [`solve_qp_warm`]).

use nalgebra::{DMatrix, DVector};

/// Active-set iteration budget.
pub const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SoftRows {
    pub g: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub weight: f64,
}

impl SoftRows {
    /// Violation of each row at `u` (non-negative).
    pub fn violations(&self, u: &DVector<f64>) -> DVector<f64> {
        let gu = &self.g * u;
        DVector::from_fn(gu.len(), |i, _| {
            (self.lo[i] - gu[i]).max(0.0) + (gu[i] - self.hi[i]).max(0.0)
        })
    }

    fn penalty(&self, u: &DVector<f64>) -> f64 {
        self.weight * self.violations(u).norm_squared()
    }

    /// Gradient of the penalty term.
    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let gu = &self.g * u;
        let signed = DVector::from_fn(gu.len(), |i, _| {
            if gu[i] < self.lo[i] {
                gu[i] - self.lo[i]
            } else if gu[i] > self.hi[i] {
                gu[i] - self.hi[i]
            } else {
                0.0
            }
        });
        self.g.transpose() * signed * (2.0 * self.weight)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Symmetric positive-definite Hessian.
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Constant offset so that [`QpProblem::cost`] equals the original objective.
    pub constant: f64,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    pub soft: Option<SoftRows>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, f: DVector<f64>, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        Self {
            h,
            f,
            constant: 0.0,
            lb,
            ub,
            soft: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Quadratic part `1/2 u' H u + f' u + c`, without soft penalties.
    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + self.f.dot(u) + self.constant
    }

    /// Full objective including soft-row penalties.
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        self.cost(u) + self.soft.as_ref().map_or(0.0, |s| s.penalty(u))
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut g = &self.h * u + &self.f;
        if let Some(s) = &self.soft {
            g += s.gradient(u);
        }
        g
    }

    /// Projected-gradient KKT residual `|u - clamp(u - grad)|_inf`.
    pub fn kkt_residual(&self, u: &DVector<f64>) -> f64 {
        let g = self.gradient(u);
        (0..u.len())
            .map(|i| (u[i] - (u[i] - g[i]).clamp(self.lb[i], self.ub[i])).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hessian.
    pub fn min_eigenvalue(&self) -> f64 {
        self.h.clone().symmetric_eigenvalues().min()
    }

    fn clamp(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| u[i].clamp(self.lb[i], self.ub[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// Iteration cap reached; the iterate is feasible but may be inaccurate.
    IterationLimit,
    /// The (reduced) Hessian was not positive definite.
    NotConvex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Largest soft-row violation at the solution.
    pub max_violation: f64,
}

impl QpSolution {
    pub fn degraded(&self) -> bool {
        self.status != QpStatus::Optimal
    }
}

pub fn solve_qp(qp: &QpProblem) -> QpSolution {
    solve_qp_warm(qp, None)
}

/// Solve starting from `warm` (clamped into the box), or from the projection
/// of zero.
///
/// Soft rows are folded into an augmented box QP: the squared distance of
/// `g_i u` to `[lo_i, hi_i]` equals `min_{w_i in [lo_i, hi_i]} (g_i u - w_i)^2`,
/// so the penalized problem is a strictly convex box QP in `(u, w)` whose
/// Schur complement on `u` is `H` itself.
pub fn solve_qp_warm(qp: &QpProblem, warm: Option<&DVector<f64>>) -> QpSolution {
    let n = qp.dim();
    let u0 = match warm {
        Some(w) if w.len() == n && w.iter().all(|v| v.is_finite()) => qp.clamp(w),
        _ => qp.clamp(&DVector::zeros(n)),
    };
    let soft = qp.soft.as_ref().filter(|s| s.weight > 0.0 && s.g.nrows() > 0);

    let (h, f, lb, ub, start) = match soft {
        None => (qp.h.clone(), qp.f.clone(), qp.lb.clone(), qp.ub.clone(), u0),
        Some(s) => {
            let m = s.g.nrows();
            let rho2 = 2.0 * s.weight;
            let mut h = DMatrix::zeros(n + m, n + m);
            h.view_mut((0, 0), (n, n))
                .copy_from(&(&qp.h + s.g.transpose() * &s.g * rho2));
            let cross = &s.g * (-rho2);
            h.view_mut((n, 0), (m, n)).copy_from(&cross);
            h.view_mut((0, n), (n, m)).copy_from(&cross.transpose());
            h.view_mut((n, n), (m, m)).fill_diagonal(rho2);
            let f = DVector::from_fn(n + m, |i, _| if i < n { qp.f[i] } else { 0.0 });
            let lb = DVector::from_fn(n + m, |i, _| if i < n { qp.lb[i] } else { s.lo[i - n] });
            let ub = DVector::from_fn(n + m, |i, _| if i < n { qp.ub[i] } else { s.hi[i - n] });
            let gu = &s.g * &u0;
            let start = DVector::from_fn(n + m, |i, _| {
                if i < n {
                    u0[i]
                } else {
                    gu[i - n].clamp(s.lo[i - n], s.hi[i - n])
                }
            });
            (h, f, lb, ub, start)
        }
    };

    // Jacobi scaling x = d .* y keeps the factorizations well conditioned
    // when input and state units differ by many orders of magnitude.
    let dim = f.len();
    let d = DVector::from_fn(dim, |i, _| if h[(i, i)] > 0.0 { h[(i, i)].sqrt().recip() } else { 1.0 });
    let hs = DMatrix::from_fn(dim, dim, |i, j| d[i] * h[(i, j)] * d[j]);
    let fs = f.component_mul(&d);
    let lbs = lb.component_div(&d);
    let ubs = ub.component_div(&d);
    let ys = DVector::from_fn(dim, |i, _| (start[i] / d[i]).clamp(lbs[i], ubs[i]));
    let (y, iterations, status) = box_active_set(&hs, &fs, &lbs, &ubs, ys, MAX_ITERATIONS);
    let u = DVector::from_fn(n, |i, _| (y[i] * d[i]).clamp(qp.lb[i], qp.ub[i]));

    QpSolution {
        objective: qp.objective(&u),
        kkt_residual: qp.kkt_residual(&u),
        max_violation: qp.soft.as_ref().map_or(0.0, |s| s.violations(&u).max().max(0.0)),
        u,
        status,
        iterations,
    }
}

/// Primal active-set method for `min 1/2 x'Hx + f'x, lb <= x <= ub`.
fn box_active_set(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    start: DVector<f64>,
    budget: usize,
) -> (DVector<f64>, usize, QpStatus) {
    let n = f.len();
    let mut x = start;
    // working set: -1 fixed at lb, +1 fixed at ub, 0 free
    let mut fixed: Vec<i8> = (0..n)
        .map(|i| {
            if x[i] <= lb[i] {
                -1
            } else if x[i] >= ub[i] {
                1
            } else {
                0
            }
        })
        .collect();
    let scale = h.amax().max(f.amax()).max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale * (1.0 + x.amax().min(1e12));

    for iter in 0..budget {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i] == 0).collect();
        let grad = h * &x + f;
        let mut step = DVector::zeros(n);
        if !free.is_empty() {
            let h_ff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| -grad[free[a]]);
            let Some(chol) = h_ff.cholesky() else {
                return (x, iter, QpStatus::NotConvex);
            };
            let p = chol.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                step[i] = p[a];
            }
        }

        // ratio test against the bounds of the free variables
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            let s = step[i];
            let limit = if s < 0.0 && lb[i].is_finite() {
                (lb[i] - x[i]) / s
            } else if s > 0.0 && ub[i].is_finite() {
                (ub[i] - x[i]) / s
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit.max(0.0);
                blocking = Some((i, if s < 0.0 { -1 } else { 1 }));
            }
        }

        if let Some((i, side)) = blocking {
            x += &step * alpha;
            x[i] = if side < 0 { lb[i] } else { ub[i] };
            fixed[i] = side;
            continue;
        }

        x += &step;
        let grad = h * &x + f;
        // release the fixed variable whose multiplier has the wrong sign
        let mut release = None;
        let mut worst = tol;
        for i in 0..n {
            let wrong = match fixed[i] {
                -1 => -grad[i],
                1 => grad[i],
                _ => continue,
            };
            if wrong > worst {
                worst = wrong;
                release = Some(i);
            }
        }
        match release {
            Some(i) => fixed[i] = 0,
            None => return (x, iter + 1, QpStatus::Optimal),
        }
    }
    (x, budget, QpStatus::IterationLimit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inf(n: usize) -> (DVector<f64>, DVector<f64>) {
        (
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
    }

    #[test]
    fn pure_input_penalty() {
        let (lb, ub) = inf(1);
        let qp = QpProblem::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1), lb, ub);
        let sol = solve_qp(&qp);
        assert_eq!(sol.u[0], 0.0);
        assert_eq!(sol.status, QpStatus::Optimal);
    }

    #[test]
    fn unconstrained_closed_form() {
        let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let (lb, ub) = inf(3);
        let expected = -h.clone().cholesky().unwrap().inverse() * &f;
        let sol = solve_qp(&QpProblem::new(h, f, lb, ub));
        assert!((sol.u - expected).amax() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn all_bounds_active() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = DVector::from_vec(vec![100.0, 100.0]);
        let lb = DVector::from_element(2, -3.0);
        let ub = DVector::from_element(2, 3.0);
        let sol = solve_qp(&QpProblem::new(h, f, lb.clone(), ub));
        assert_eq!(sol.u, lb);
        assert_eq!(sol.status, QpStatus::Optimal);
    }

    #[test]
    fn mixed_active_set_satisfies_kkt() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let f = DVector::from_vec(vec![-5.0, 1.0, 4.0]);
        let lb = DVector::from_element(3, -1.0);
        let ub = DVector::from_element(3, 1.0);
        let qp = QpProblem::new(h, f, lb, ub);
        let sol = solve_qp(&qp);
        assert!(sol.kkt_residual < 1e-12, "{}", sol.kkt_residual);
        assert_eq!(sol.u[0], 1.0);
        assert_eq!(sol.u[2], -1.0);
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let h = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 3.0]);
        let f = DVector::from_vec(vec![-9.0, 2.0, 7.0]);
        let lb = DVector::from_element(3, -1.5);
        let ub = DVector::from_element(3, 2.0);
        let qp = QpProblem::new(h, f, lb, ub);
        let cold = solve_qp(&qp);
        let warm = solve_qp_warm(&qp, Some(&DVector::from_vec(vec![2.0, -1.5, 0.3])));
        assert!((cold.u - warm.u).amax() < 1e-12);
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let h = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.2, 0.7]);
        let f = DVector::from_vec(vec![-4.0, 0.9]);
        let mut qp = QpProblem::new(h, f, DVector::from_element(2, -1.0), DVector::from_element(2, 1.0));
        qp.soft = Some(SoftRows {
            g: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            lo: DVector::from_element(1, -0.2),
            hi: DVector::from_element(1, 0.2),
            weight: 10.0,
        });
        let a = solve_qp(&qp);
        let b = solve_qp(&qp);
        assert_eq!(a.u.as_slice(), b.u.as_slice());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn soft_rows_reach_piecewise_optimum() {
        // min (u - 2)^2 + rho * max(0, u - 1)^2  ->  u = (2 + rho) / (1 + rho)
        for rho in [0.5, 3.0, 100.0] {
            let mut qp = QpProblem::new(
                DMatrix::from_element(1, 1, 2.0),
                DVector::from_element(1, -4.0),
                DVector::from_element(1, -10.0),
                DVector::from_element(1, 10.0),
            );
            qp.constant = 4.0;
            qp.soft = Some(SoftRows {
                g: DMatrix::from_element(1, 1, 1.0),
                lo: DVector::from_element(1, -5.0),
                hi: DVector::from_element(1, 1.0),
                weight: rho,
            });
            let sol = solve_qp(&qp);
            let expected = (2.0 + rho) / (1.0 + rho);
            assert!((sol.u[0] - expected).abs() < 1e-12, "rho {rho}: {}", sol.u[0]);
            assert!((sol.max_violation - (expected - 1.0)).abs() < 1e-12);
            assert_eq!(sol.status, QpStatus::Optimal);
        }
    }

    #[test]
    fn not_convex_is_reported() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (lb, ub) = inf(2);
        let sol = solve_qp(&QpProblem::new(h, DVector::from_element(2, 1.0), lb, ub));
        assert_eq!(sol.status, QpStatus::NotConvex);
        assert!(sol.degraded());
    }
}
