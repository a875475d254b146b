//! Receding-horizon controller on the discretized sideslip-difference model.
//!
//! The horizon is condensed into a dense QP over the input sequence. Input
//! bounds are hard; state bounds are softened with a quadratic penalty so the
//! problem is feasible from any initial state.

pub mod qp;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::ctrl_model::DiscreteModel;
use crate::error::{Error, Result};

pub use qp::{solve_qp, solve_qp_warm, QpProblem, QpSolution, QpStatus, SoftRows};

const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig {
    /// Prediction horizon [steps].
    pub horizon: usize,
    /// Diagonal state weight `[Q11, Q22]`.
    pub q: [f64; 2],
    /// Input weight.
    pub r: f64,
    /// Input-rate weight.
    pub w: f64,
    /// Target sideslip difference magnitude [rad].
    pub zeta: f64,
    /// Rear sideslip reference magnitude [rad].
    pub alpha_r_des: f64,
    /// Bounds on the sideslip difference magnitude [rad].
    pub zeta_min: f64,
    pub zeta_max: f64,
    /// Bounds on the rear sideslip [rad], for a turn with positive sideslip difference.
    pub alpha_r_min: f64,
    pub alpha_r_max: f64,
    /// Quadratic penalty on state-bound violation.
    pub slack_penalty: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            q: [1000.0, 1.0],
            r: 1e-12,
            w: 1e-8,
            zeta: 0.03 * DEG,
            alpha_r_des: 0.5 * DEG,
            zeta_min: 0.0,
            zeta_max: 1.5 * DEG,
            alpha_r_min: -2.0 * DEG,
            alpha_r_max: 2.0 * DEG,
            slack_penalty: 1e4,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::MpcConfig(msg));
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        let weights = [self.q[0], self.q[1], self.r, self.w, self.slack_penalty];
        if weights.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail(format!("weights must be finite and non-negative: {weights:?}"));
        }
        if !(self.r + self.w > 0.0) {
            return fail("R + W must be positive for a strictly convex problem".into());
        }
        if !(self.zeta_min < self.zeta_max) {
            return fail(format!(
                "zeta_min {} must be below zeta_max {}",
                self.zeta_min, self.zeta_max
            ));
        }
        if !(self.alpha_r_min < self.alpha_r_max) {
            return fail(format!(
                "alpha_r_min {} must be below alpha_r_max {}",
                self.alpha_r_min, self.alpha_r_max
            ));
        }
        Ok(())
    }

    /// Reference and bounds mirrored into the current turn direction.
    pub fn targets(&self, turn_sign: f64) -> Targets {
        let s = if turn_sign < 0.0 { -1.0 } else { 1.0 };
        let ordered = |a: f64, b: f64| if a <= b { (a, b) } else { (b, a) };
        let (x1_lo, x1_hi) = ordered(s * self.zeta_min, s * self.zeta_max);
        let (x2_lo, x2_hi) = ordered(s * self.alpha_r_min, s * self.alpha_r_max);
        Targets {
            x_ref: Vector2::new(s * self.zeta, s * self.alpha_r_des),
            x_min: Vector2::new(x1_lo, x2_lo),
            x_max: Vector2::new(x1_hi, x2_hi),
        }
    }
}

/// Turn direction from the sideslip difference, with `sign(0) = +1`.
pub fn turn_sign(x1: f64) -> f64 {
    if x1 < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub x_ref: Vector2<f64>,
    pub x_min: Vector2<f64>,
    pub x_max: Vector2<f64>,
}

/// Stacked prediction `X = free + G U` over the horizon, states interleaved
/// as `[x1(1), x2(1), x1(2), ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub free: DVector<f64>,
    pub g: DMatrix<f64>,
}

impl Prediction {
    pub fn new(m: &DiscreteModel, x0: &Vector2<f64>, horizon: usize) -> Self {
        let n = horizon;
        let mut free = DVector::zeros(2 * n);
        let mut g = DMatrix::zeros(2 * n, n);
        // impulse[k] = A^k B
        let mut impulse: Vec<Vector2<f64>> = Vec::with_capacity(n);
        let mut a_pow_b = m.b;
        for _ in 0..n {
            impulse.push(a_pow_b);
            a_pow_b = m.a * a_pow_b;
        }
        let mut x = *x0;
        for k in 0..n {
            x = m.a * x + m.e;
            free.fixed_rows_mut::<2>(2 * k).copy_from(&x);
            for j in 0..=k {
                g.fixed_view_mut::<2, 1>(2 * k, j).copy_from(&impulse[k - j]);
            }
        }
        Self { free, g }
    }

    pub fn states(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.free + &self.g * u
    }
}

/// Dense QP for one control period.
pub fn condense(
    m: &DiscreteModel,
    cfg: &MpcConfig,
    targets: &Targets,
    x0: &Vector2<f64>,
    u_prev: f64,
    u_bound: f64,
) -> QpProblem {
    let n = cfg.horizon;
    let pred = Prediction::new(m, x0, n);

    let mut q_diag = DVector::zeros(2 * n);
    let mut x_ref = DVector::zeros(2 * n);
    let mut x_lo = DVector::zeros(2 * n);
    let mut x_hi = DVector::zeros(2 * n);
    for k in 0..n {
        for i in 0..2 {
            q_diag[2 * k + i] = cfg.q[i];
            x_ref[2 * k + i] = targets.x_ref[i];
            x_lo[2 * k + i] = targets.x_min[i];
            x_hi[2 * k + i] = targets.x_max[i];
        }
    }

    // input-rate operator: (D U)_k = u_k - u_{k-1}, with u_{-1} = u_prev
    let mut diff = DMatrix::<f64>::identity(n, n);
    for k in 1..n {
        diff[(k, k - 1)] = -1.0;
    }
    let mut rate_offset = DVector::zeros(n);
    rate_offset[0] = u_prev;

    let z = &pred.free - &x_ref;
    let qg = DMatrix::from_fn(2 * n, n, |i, j| q_diag[i] * pred.g[(i, j)]);
    let qz = z.component_mul(&q_diag);

    let mut h = pred.g.transpose() * &qg;
    h += DMatrix::<f64>::identity(n, n) * cfg.r;
    h += diff.transpose() * &diff * cfg.w;
    h *= 2.0;
    // exact symmetry for the Cholesky factorizations
    h = (&h + h.transpose()) * 0.5;

    let f = (pred.g.transpose() * &qz - diff.transpose() * &rate_offset * cfg.w) * 2.0;
    let constant = z.dot(&qz) + cfg.w * u_prev * u_prev;

    let bound = u_bound.abs();
    QpProblem {
        h,
        f,
        constant,
        lb: DVector::from_element(n, -bound),
        ub: DVector::from_element(n, bound),
        soft: Some(SoftRows {
            lo: &x_lo - &pred.free,
            hi: &x_hi - &pred.free,
            g: pred.g,
            weight: cfg.slack_penalty,
        }),
    }
}

/// Direct evaluation of the horizon cost by forward simulation.
pub fn simulate_cost(
    m: &DiscreteModel,
    cfg: &MpcConfig,
    targets: &Targets,
    x0: &Vector2<f64>,
    u_prev: f64,
    u: &[f64],
) -> f64 {
    let q = Matrix2::from_diagonal(&Vector2::new(cfg.q[0], cfg.q[1]));
    let mut x = *x0;
    let mut prev = u_prev;
    let mut cost = 0.0;
    for &uk in u {
        x = m.a * x + m.b * uk + m.e;
        let e = x - targets.x_ref;
        cost += e.dot(&(q * e)) + cfg.r * uk * uk + cfg.w * (uk - prev) * (uk - prev);
        prev = uk;
    }
    cost
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcOutput {
    /// First input of the optimized sequence, clamped to the input bound.
    pub m_z: f64,
    pub sequence: DVector<f64>,
    /// Largest predicted state-bound violation [rad].
    pub slack: f64,
    pub iterations: usize,
    pub predicted_min: Vector2<f64>,
    pub predicted_max: Vector2<f64>,
    pub degraded: bool,
    pub fault: bool,
}

impl MpcOutput {
    fn fault(horizon: usize) -> Self {
        Self {
            m_z: 0.0,
            sequence: DVector::zeros(horizon),
            slack: 0.0,
            iterations: 0,
            predicted_min: Vector2::zeros(),
            predicted_max: Vector2::zeros(),
            degraded: false,
            fault: true,
        }
    }
}

/// Stateful wrapper keeping the shifted previous solution as warm start.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub cfg: MpcConfig,
    warm: Option<DVector<f64>>,
}

impl MpcController {
    pub fn new(cfg: MpcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, warm: None })
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn control_step(
        &mut self,
        x1_meas: f64,
        x2_hat: f64,
        m: &DiscreteModel,
        u_prev: f64,
        u_bound: f64,
    ) -> MpcOutput {
        let out = control_step(x1_meas, x2_hat, m, &self.cfg, u_prev, u_bound, self.warm.as_ref());
        self.warm = if out.fault {
            None
        } else {
            let n = out.sequence.len();
            Some(DVector::from_fn(n, |k, _| out.sequence[(k + 1).min(n - 1)]))
        };
        out
    }
}

/// Solve one receding-horizon problem and return the first input.
pub fn control_step(
    x1_meas: f64,
    x2_hat: f64,
    m: &DiscreteModel,
    cfg: &MpcConfig,
    u_prev: f64,
    u_bound: f64,
    warm: Option<&DVector<f64>>,
) -> MpcOutput {
    let x0 = Vector2::new(x1_meas, x2_hat);
    if !m.is_finite() || !x0.iter().all(|v| v.is_finite()) || !u_prev.is_finite() || !u_bound.is_finite() {
        return MpcOutput::fault(cfg.horizon);
    }
    let targets = cfg.targets(turn_sign(x1_meas));
    let qp = condense(m, cfg, &targets, &x0, u_prev, u_bound);
    let sol = solve_qp_warm(&qp, warm);
    if sol.status == QpStatus::NotConvex || !sol.u.iter().all(|v| v.is_finite()) {
        return MpcOutput::fault(cfg.horizon);
    }
    let states = Prediction::new(m, &x0, cfg.horizon).states(&sol.u);
    let mut predicted_min = Vector2::repeat(f64::INFINITY);
    let mut predicted_max = Vector2::repeat(f64::NEG_INFINITY);
    for k in 0..cfg.horizon {
        for i in 0..2 {
            predicted_min[i] = predicted_min[i].min(states[2 * k + i]);
            predicted_max[i] = predicted_max[i].max(states[2 * k + i]);
        }
    }
    let bound = u_bound.abs();
    MpcOutput {
        m_z: sol.u[0].clamp(-bound, bound),
        slack: sol.max_violation,
        iterations: sol.iterations,
        predicted_min,
        predicted_max,
        degraded: sol.degraded(),
        fault: false,
        sequence: sol.u,
    }
}
