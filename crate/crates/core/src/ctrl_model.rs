//! Control-oriented model in sideslip-difference coordinates.
//!
//! State `x = [alpha_f - alpha_r, alpha_r]`, input `u = M_z`, output
//! `y = [r, a_y]`:
//!
//! ```text
//!     x' = A x + B u + E(delta_f, delta_f_dot)
//!     y  = C x + D(delta_f)
//! ```
//!
//! `A`, `B`, `C` depend only on speed; `E` and `D` follow the driver's steering.

use nalgebra::{Matrix2, Matrix4x2, Vector2};

use crate::error::{Error, Result};
use crate::params::VehicleParams;

/// Speed-dependent part of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCore {
    pub v_x: f64,
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: Matrix2<f64>,
}

impl LinearCore {
    pub fn new(p: &VehicleParams, v_x: f64) -> Result<Self> {
        if !(v_x.is_finite() && v_x > 0.0) {
            return Err(Error::NonPositiveSpeed(v_x));
        }
        let VehicleParams {
            mass: m,
            l_f,
            l_r,
            c_f,
            c_r,
            i_z,
            ..
        } = *p;
        let l = p.wheelbase();
        let iv = i_z * v_x;
        let mv = m * v_x;

        #[rustfmt::skip]
        let a = Matrix2::new(
            -l_f * c_f * l / iv,
            l / iv * (-l_f * c_f + l_r * c_r),
            -c_f / mv + l_f * l_r * c_f / iv - v_x / l,
            -(c_f + c_r) / mv + l_f * l_r * c_f / iv - l_r * l_r * c_r / iv,
        );
        let b = Vector2::new(l / iv, -l_r / iv);
        #[rustfmt::skip]
        let c = Matrix2::new(
            v_x / l, 0.0,
            -c_f / m, -(c_f + c_r) / m,
        );
        Ok(Self { v_x, a, b, c })
    }

    /// Affine terms `(E, D)` for the current steering.
    pub fn affine(&self, l: f64, delta_f: f64, delta_f_dot: f64) -> (Vector2<f64>, Vector2<f64>) {
        let e = Vector2::new(-delta_f_dot, -self.v_x / l * delta_f);
        let d = Vector2::new(self.v_x / l * delta_f, 0.0);
        (e, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub e: Vector2<f64>,
    pub c: Matrix2<f64>,
    pub d: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub e: Vector2<f64>,
    pub c: Matrix2<f64>,
    pub d: Vector2<f64>,
    pub t_s: f64,
}

impl DiscreteModel {
    pub fn is_finite(&self) -> bool {
        self.a
            .iter()
            .chain(self.b.iter())
            .chain(self.e.iter())
            .all(|v| v.is_finite())
    }
}

/// Continuous model and its Euler discretization at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtrlModel {
    pub v_x: f64,
    pub continuous: ContinuousModel,
    pub discrete: DiscreteModel,
}

impl CtrlModel {
    pub fn new(p: &VehicleParams, v_x: f64, delta_f: f64, delta_f_dot: f64) -> Result<Self> {
        let core = LinearCore::new(p, v_x)?;
        Ok(Self::from_core(&core, p, delta_f, delta_f_dot))
    }

    /// Rebuild the steering-dependent terms on a cached speed core.
    pub fn from_core(core: &LinearCore, p: &VehicleParams, delta_f: f64, delta_f_dot: f64) -> Self {
        let (e, d) = core.affine(p.wheelbase(), delta_f, delta_f_dot);
        let continuous = ContinuousModel {
            a: core.a,
            b: core.b,
            e,
            c: core.c,
            d,
        };
        Self {
            v_x: core.v_x,
            continuous,
            discrete: discretize(&continuous, p.t_s),
        }
    }

    /// Predicted measurement `C x + D`.
    pub fn output(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.continuous.c * x + self.continuous.d
    }
}

pub fn build_continuous(p: &VehicleParams, v_x: f64, delta_f: f64, delta_f_dot: f64) -> Result<ContinuousModel> {
    let core = LinearCore::new(p, v_x)?;
    let (e, d) = core.affine(p.wheelbase(), delta_f, delta_f_dot);
    Ok(ContinuousModel {
        a: core.a,
        b: core.b,
        e,
        c: core.c,
        d,
    })
}

/// Forward-Euler discretization with period `t_s`.
pub fn discretize(m: &ContinuousModel, t_s: f64) -> DiscreteModel {
    DiscreteModel {
        a: Matrix2::identity() + m.a * t_s,
        b: m.b * t_s,
        e: m.e * t_s,
        c: m.c,
        d: m.d,
        t_s,
    }
}

/// Sideslip difference from yaw rate and steering alone: `(L / v_x) r - delta_f`.
pub fn measure_x1(r: f64, delta_f: f64, v_x: f64, p: &VehicleParams) -> f64 {
    p.wheelbase() / v_x * r - delta_f
}

/// Whether `(a, c)` has a rank-2 observability matrix `[c; c a]`.
pub fn is_observable(a: &Matrix2<f64>, c: &Matrix2<f64>) -> bool {
    let ca = c * a;
    let mut obs = Matrix4x2::zeros();
    obs.fixed_view_mut::<2, 2>(0, 0).copy_from(c);
    obs.fixed_view_mut::<2, 2>(2, 0).copy_from(&ca);
    let sv = obs.singular_values();
    let largest = sv.max();
    largest > 0.0 && sv.min() > largest * 1e-12
}

/// Steering-rate estimate: backward difference of the steer command over the
/// control period, through a first-order low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteerRateEstimator {
    time_constant: f64,
    previous: Option<f64>,
    rate: f64,
}

impl SteerRateEstimator {
    pub const DEFAULT_TIME_CONSTANT: f64 = 0.02;

    pub fn new(time_constant: f64) -> Self {
        Self {
            time_constant: time_constant.max(0.0),
            previous: None,
            rate: 0.0,
        }
    }

    pub fn update(&mut self, delta_f: f64, dt: f64) -> f64 {
        let raw = match self.previous {
            Some(prev) => (delta_f - prev) / dt,
            None => 0.0,
        };
        self.previous = Some(delta_f);
        let blend = dt / (self.time_constant + dt);
        self.rate += blend * (raw - self.rate);
        self.rate
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Default for SteerRateEstimator {
    fn default() -> Self {
        Self::new(Self::DEFAULT_TIME_CONSTANT)
    }
}
