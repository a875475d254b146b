//! Nonlinear single-track vehicle used as ground truth in closed-loop runs.
//!
//! State is body sideslip and yaw rate at constant longitudinal speed, with a
//! piecewise-affine saturating tire per axle. Global pose is carried along for
//! path-following scenarios.

use thiserror::Error;

use crate::error::{Error, Result};
use crate::params::VehicleParams;

/// Largest |beta| [rad] or |r| [rad/s] accepted before a run is declared diverged.
pub const DIVERGENCE_BETA: f64 = std::f64::consts::FRAC_PI_2;
pub const DIVERGENCE_YAW_RATE: f64 = 10.0;

/// Mechanical steering stop [rad].
pub const MAX_ROAD_WHEEL_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

/// Saturation onset of the front tire on a dry road [rad] (6 deg).
pub const FRONT_ALPHA_P_REF: f64 = 6.0 * std::f64::consts::PI / 180.0;
/// Saturation onset of the rear tire on a dry road [rad] (7 deg).
pub const REAR_ALPHA_P_REF: f64 = 7.0 * std::f64::consts::PI / 180.0;
/// Post-saturation slope as a fraction of the cornering stiffness.
pub const DEFAULT_POST_SLOPE_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PlantFault {
    #[error("non-finite plant state or derivative")]
    NonFinite,
    #[error("plant diverged (beta = {beta} rad, r = {r} rad/s)")]
    Diverged { beta: f64, r: f64 },
    #[error("integration step {0} s outside (0, T_s]")]
    InvalidStep(f64),
}

/// Lateral force law of one axle.
///
/// Linear with slope `-c` for `|alpha| <= mu * alpha_p_ref`, continuing with
/// the shallower slope `-d_post` beyond. The law is odd and continuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireCurve {
    c: f64,
    alpha_p_ref: f64,
    d_post: f64,
    mu: f64,
}

impl TireCurve {
    pub fn new(c: f64, alpha_p_ref: f64, d_post: f64, mu: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("tire.C", c, "finite and strictly positive"));
        }
        if !(alpha_p_ref.is_finite() && alpha_p_ref > 0.0) {
            return Err(Error::invalid(
                "tire.alpha_p",
                alpha_p_ref,
                "finite and strictly positive",
            ));
        }
        if !(d_post.is_finite() && d_post >= 0.0 && d_post < c) {
            return Err(Error::invalid("tire.d_post", d_post, "in [0, C)"));
        }
        if !(mu > 0.0 && mu <= 1.2) {
            return Err(Error::invalid("scenario.mu", mu, "in (0, 1.2]"));
        }
        Ok(Self {
            c,
            alpha_p_ref,
            d_post,
            mu,
        })
    }

    pub fn front(p: &VehicleParams, mu: f64) -> Result<Self> {
        Self::new(p.c_f, FRONT_ALPHA_P_REF, DEFAULT_POST_SLOPE_RATIO * p.c_f, mu)
    }

    pub fn rear(p: &VehicleParams, mu: f64) -> Result<Self> {
        Self::new(p.c_r, REAR_ALPHA_P_REF, DEFAULT_POST_SLOPE_RATIO * p.c_r, mu)
    }

    pub fn stiffness(&self) -> f64 {
        self.c
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn post_slope(&self) -> f64 {
        self.d_post
    }

    /// Saturation onset on the current road, `mu * alpha_p_ref`.
    pub fn alpha_p(&self) -> f64 {
        self.mu * self.alpha_p_ref
    }

    /// Lateral force [N] at slip angle `alpha` [rad].
    pub fn force(&self, alpha: f64) -> f64 {
        let a = alpha.abs();
        let alpha_p = self.alpha_p();
        let magnitude = if a <= alpha_p {
            self.c * a
        } else {
            self.c * alpha_p + self.d_post * (a - alpha_p)
        };
        if alpha < 0.0 {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Free function form of [`TireCurve::force`].
pub fn tire_force(t: &TireCurve, alpha: f64) -> f64 {
    t.force(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Body sideslip [rad].
    pub beta: f64,
    /// Yaw rate [rad/s].
    pub r: f64,
    /// Heading [rad].
    pub psi: f64,
    /// Global position [m].
    pub x: f64,
    pub y: f64,
    /// Longitudinal speed [m/s], held constant.
    pub v_x: f64,
}

impl PlantState {
    pub fn straight(v_x: f64) -> Self {
        Self {
            beta: 0.0,
            r: 0.0,
            psi: 0.0,
            x: 0.0,
            y: 0.0,
            v_x,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.beta, self.r, self.psi, self.x, self.y, self.v_x]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriverInput {
    /// Road-wheel steer angle [rad].
    pub delta_f: f64,
    /// Steer rate [rad/s].
    pub delta_f_dot: f64,
}

impl DriverInput {
    pub fn new(delta_f: f64, delta_f_dot: f64) -> Self {
        Self {
            delta_f: delta_f.clamp(-MAX_ROAD_WHEEL_ANGLE, MAX_ROAD_WHEEL_ANGLE),
            delta_f_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub beta_dot: f64,
    pub r_dot: f64,
}

/// The vehicle: constants plus one tire curve per axle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub params: VehicleParams,
    pub front: TireCurve,
    pub rear: TireCurve,
}

impl Plant {
    pub fn new(params: VehicleParams, front: TireCurve, rear: TireCurve) -> Self {
        Self { params, front, rear }
    }

    /// Default tire curves on a road with friction `mu`.
    pub fn on_road(params: VehicleParams, mu: f64) -> Result<Self> {
        Ok(Self::new(
            params,
            TireCurve::front(&params, mu)?,
            TireCurve::rear(&params, mu)?,
        ))
    }

    /// Front and rear wheel sideslip angles [rad].
    pub fn wheel_sideslips(&self, s: &PlantState, u: &DriverInput) -> (f64, f64) {
        let p = &self.params;
        let alpha_f = s.beta + p.l_f / s.v_x * s.r - u.delta_f;
        let alpha_r = s.beta - p.l_r / s.v_x * s.r;
        (alpha_f, alpha_r)
    }

    /// Axle lateral forces [N].
    pub fn axle_forces(&self, s: &PlantState, u: &DriverInput) -> (f64, f64) {
        let (alpha_f, alpha_r) = self.wheel_sideslips(s, u);
        (self.front.force(alpha_f), self.rear.force(alpha_r))
    }

    pub fn derivatives(&self, s: &PlantState, u: &DriverInput, m_z: f64) -> Result<Derivatives, PlantFault> {
        let p = &self.params;
        let (f_yf, f_yr) = self.axle_forces(s, u);
        let beta_dot = (f_yf + f_yr) / (p.mass * s.v_x) - s.r;
        let r_dot = (p.l_f * f_yf - p.l_r * f_yr + m_z) / p.i_z;
        if beta_dot.is_finite() && r_dot.is_finite() {
            Ok(Derivatives { beta_dot, r_dot })
        } else {
            Err(PlantFault::NonFinite)
        }
    }

    /// Lateral acceleration [m/s^2], `(F_yf + F_yr) / m`.
    pub fn lateral_acceleration(&self, s: &PlantState, u: &DriverInput) -> f64 {
        let (f_yf, f_yr) = self.axle_forces(s, u);
        (f_yf + f_yr) / self.params.mass
    }

    fn rates(&self, s: &PlantState, u: &DriverInput, m_z: f64) -> Result<[f64; 5], PlantFault> {
        let d = self.derivatives(s, u, m_z)?;
        let v_y = s.v_x * s.beta.tan();
        let (sin_psi, cos_psi) = s.psi.sin_cos();
        Ok([
            d.beta_dot,
            d.r_dot,
            s.r,
            s.v_x * cos_psi - v_y * sin_psi,
            s.v_x * sin_psi + v_y * cos_psi,
        ])
    }

    /// One classical RK4 step of length `dt` with inputs held constant.
    pub fn step(&self, s: &PlantState, u: &DriverInput, m_z: f64, dt: f64) -> Result<PlantState, PlantFault> {
        if !(dt > 0.0 && dt <= self.params.t_s * (1.0 + 1e-12)) {
            return Err(PlantFault::InvalidStep(dt));
        }
        let advance = |k: &[f64; 5], h: f64| PlantState {
            beta: s.beta + h * k[0],
            r: s.r + h * k[1],
            psi: s.psi + h * k[2],
            x: s.x + h * k[3],
            y: s.y + h * k[4],
            v_x: s.v_x,
        };
        let k1 = self.rates(s, u, m_z)?;
        let k2 = self.rates(&advance(&k1, dt / 2.0), u, m_z)?;
        let k3 = self.rates(&advance(&k2, dt / 2.0), u, m_z)?;
        let k4 = self.rates(&advance(&k3, dt), u, m_z)?;
        let mut slope = [0.0; 5];
        for i in 0..5 {
            slope[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        let next = advance(&slope, dt);
        if !next.is_finite() {
            return Err(PlantFault::NonFinite);
        }
        if next.beta.abs() > DIVERGENCE_BETA || next.r.abs() > DIVERGENCE_YAW_RATE {
            return Err(PlantFault::Diverged {
                beta: next.beta,
                r: next.r,
            });
        }
        Ok(next)
    }

    /// Advance over `period` with `substeps` equal RK4 steps.
    pub fn advance(
        &self,
        s: &PlantState,
        u: &DriverInput,
        m_z: f64,
        period: f64,
        substeps: usize,
    ) -> Result<PlantState, PlantFault> {
        let dt = period / substeps as f64;
        (0..substeps).try_fold(*s, |state, _| self.step(&state, u, m_z, dt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    fn plant(mu: f64) -> Plant {
        Plant::on_road(VehicleParams::default(), mu).unwrap()
    }

    #[test]
    fn tire_force_fixtures() {
        let p = VehicleParams::default();
        let t = TireCurve::front(&p, 1.0).unwrap();
        let ap = t.alpha_p();
        assert_eq!(t.force(0.0), 0.0);
        assert!((t.force(ap) + p.c_f * ap).abs() < 1e-9);
        // outer branch: C ap + 0.05 C (2ap - ap) = C ap (1.05)
        assert!((t.force(2.0 * ap) + p.c_f * ap * 1.05).abs() < 1e-9);
        assert!((t.force(-2.0 * ap) - p.c_f * ap * 1.05).abs() < 1e-9);
    }

    #[test]
    fn tire_friction_scales_onset() {
        let p = VehicleParams::default();
        let dry = TireCurve::front(&p, 1.0).unwrap();
        let wet = TireCurve::front(&p, 0.5).unwrap();
        assert!((wet.alpha_p() - 0.5 * dry.alpha_p()).abs() < 1e-15);
        // same force in the shared linear band
        assert_eq!(wet.force(0.01), dry.force(0.01));
        assert!(TireCurve::front(&p, 0.0).is_err());
        assert!(TireCurve::front(&p, 1.3).is_err());
        assert!(TireCurve::new(1.0, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn wheel_sideslip_fixtures() {
        let pl = plant(0.85);
        let s = PlantState {
            beta: 0.01,
            ..PlantState::straight(18.06)
        };
        let (af, ar) = pl.wheel_sideslips(&s, &DriverInput::default());
        assert_eq!((af, ar), (0.01, 0.01));

        let s = PlantState {
            r: 0.1,
            ..PlantState::straight(18.06)
        };
        let u = DriverInput::new(0.05, 0.0);
        let (af, ar) = pl.wheel_sideslips(&s, &u);
        assert!((af - (1.165 / 18.06 * 0.1 - 0.05)).abs() < 1e-15);
        assert!((ar + 1.165 / 18.06 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn origin_is_equilibrium() {
        let pl = plant(0.85);
        let s = PlantState::straight(18.06);
        let d = pl.derivatives(&s, &DriverInput::default(), 0.0).unwrap();
        assert_eq!((d.beta_dot, d.r_dot), (0.0, 0.0));
        let next = pl.step(&s, &DriverInput::default(), 0.0, 0.001).unwrap();
        assert_eq!(next.beta, 0.0);
        assert_eq!(next.r, 0.0);
        assert_eq!(next.y, 0.0);
    }

    #[test]
    fn yaw_moment_only() {
        let pl = plant(0.85);
        let d = pl
            .derivatives(&PlantState::straight(18.06), &DriverInput::default(), 222.4)
            .unwrap();
        assert!((d.r_dot - 222.4 / 1547.2365).abs() < 1e-12);
        assert_eq!(d.beta_dot, 0.0);
    }

    #[test]
    fn lateral_acceleration_linear_band() {
        let pl = plant(0.85);
        let p = pl.params;
        let s = PlantState {
            beta: -0.004,
            r: 0.12,
            ..PlantState::straight(18.06)
        };
        let u = DriverInput::new(0.03, 0.0);
        let (af, ar) = pl.wheel_sideslips(&s, &u);
        let expected = (-p.c_f * af - p.c_r * ar) / p.mass;
        assert!((pl.lateral_acceleration(&s, &u) - expected).abs() < 1e-12);
        // a_y = v_x (beta_dot + r)
        let d = pl.derivatives(&s, &u, 0.0).unwrap();
        assert!((pl.lateral_acceleration(&s, &u) - s.v_x * (d.beta_dot + s.r)).abs() < 1e-12);
    }

    #[test]
    fn open_loop_linearization_is_stable() {
        let p = VehicleParams::default();
        for v in [5.0, 18.06, 40.0] {
            let a11 = -(p.c_f + p.c_r) / (p.mass * v);
            let a12 = (p.l_r * p.c_r - p.l_f * p.c_f) / (p.mass * v * v) - 1.0;
            let a21 = (p.l_r * p.c_r - p.l_f * p.c_f) / p.i_z;
            let a22 = -(p.l_f * p.l_f * p.c_f + p.l_r * p.l_r * p.c_r) / (p.i_z * v);
            let a = Matrix2::new(a11, a12, a21, a22);
            for ev in a.complex_eigenvalues().iter() {
                assert!(ev.re < 0.0, "v = {v}: {ev}");
            }
        }
    }

    #[test]
    fn rk4_fourth_order() {
        let pl = plant(0.85);
        let u = DriverInput::new(0.04, 0.0);
        let run = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut s = PlantState::straight(18.06);
            for _ in 0..n {
                s = pl.step(&s, &u, 150.0, dt).unwrap();
            }
            s
        };
        let reference = run(0.0001);
        let e_coarse = (run(0.004).r - reference.r).abs();
        let e_fine = (run(0.002).r - reference.r).abs();
        let ratio = e_coarse / e_fine;
        // halving dt should cut the error by ~2^4
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_step() {
        let pl = plant(0.85);
        let s = PlantState::straight(18.06);
        assert!(matches!(
            pl.step(&s, &DriverInput::default(), 0.0, 0.0),
            Err(PlantFault::InvalidStep(_))
        ));
        assert!(pl.step(&s, &DriverInput::default(), 0.0, 0.006).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let pl = plant(0.3);
        let mut s = PlantState::straight(30.0);
        let u = DriverInput::new(0.2, 0.0);
        let mut fault = None;
        for _ in 0..20_000 {
            match pl.step(&s, &u, -50_000.0, 0.001) {
                Ok(next) => s = next,
                Err(e) => {
                    fault = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(fault, Some(PlantFault::Diverged { .. })));
    }

    #[test]
    fn constant_steer_settles_understeer() {
        let pl = plant(0.85);
        let u = DriverInput::new(0.0366, 0.0);
        let s = pl.advance(&PlantState::straight(18.06), &u, 0.0, 5.0, 5000).unwrap();
        let (af, ar) = pl.wheel_sideslips(&s, &u);
        assert!(af.abs() > ar.abs());
        let d = pl.derivatives(&s, &u, 0.0).unwrap();
        assert!(d.r_dot.abs() < 1e-9 && d.beta_dot.abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tire_is_odd_and_monotone(a in -0.5f64..0.5, b in 0.0f64..0.5, mu in 0.1f64..1.2) {
                let t = TireCurve::rear(&VehicleParams::default(), mu).unwrap();
                prop_assert_eq!(t.force(-a), -t.force(a));
                let (lo, hi) = if a.abs() <= b { (a.abs(), b) } else { (b, a.abs()) };
                prop_assert!(t.force(hi).abs() >= t.force(lo).abs());
            }

            #[test]
            fn tire_continuous_at_onset(mu in 0.1f64..1.2) {
                let t = TireCurve::front(&VehicleParams::default(), mu).unwrap();
                let ap = t.alpha_p();
                let eps = 1e-9;
                prop_assert!((t.force(ap + eps) - t.force(ap - eps)).abs() < 1e-3);
            }

            #[test]
            fn sideslip_difference_identity(beta in -0.1f64..0.1, r in -1.0f64..1.0, d in -0.2f64..0.2, v in 5.0f64..40.0) {
                let pl = plant(0.85);
                let s = PlantState { beta, r, ..PlantState::straight(v) };
                let (af, ar) = pl.wheel_sideslips(&s, &DriverInput::new(d, 0.0));
                let l = pl.params.wheelbase();
                prop_assert!(((af - ar) - (l / v * r - d)).abs() < 1e-12);
            }
        }
    }
}
