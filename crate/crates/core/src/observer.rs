//! Luenberger observer for the rear wheel sideslip.
//!
//! Only the sideslip difference is measurable from yaw rate and steering; the
//! rear sideslip is reconstructed from the yaw rate / lateral acceleration
//! outputs.

use nalgebra::{Matrix2, RowVector2, Vector2};

use crate::ctrl_model::{is_observable, CtrlModel, LinearCore};
use crate::error::{Error, Result};

/// Default observer poles [1/s].
pub const DEFAULT_POLES: [f64; 2] = [-30.0, -40.0];

/// Output blend used for gain design: the default uses lateral acceleration.
pub const DEFAULT_OUTPUT_WEIGHTS: [f64; 2] = [0.0, 1.0];

/// Gain `l` such that `eig(a - l c) = poles`.
///
/// The two outputs are blended into one channel `w' c` and the gain is placed
/// with Ackermann's formula on that channel, giving `l = k w'`. Repeated poles
/// are handled by the same formula.
pub fn design_gain(
    a: &Matrix2<f64>,
    c: &Matrix2<f64>,
    poles: [f64; 2],
    output_weights: [f64; 2],
) -> Result<Matrix2<f64>> {
    if poles.iter().any(|p| !(p.is_finite() && *p < 0.0)) {
        return Err(Error::ObserverDesign(format!(
            "poles must be finite and negative, got {poles:?}"
        )));
    }
    let [p1, p2] = poles;
    design_gain_for_polynomial(a, c, -(p1 + p2), p1 * p2, output_weights)
}

/// Same as [`design_gain`] for the monic target polynomial `s^2 + c1 s + c0`,
/// which also covers complex-conjugate pole pairs.
pub fn design_gain_for_polynomial(
    a: &Matrix2<f64>,
    c: &Matrix2<f64>,
    c1: f64,
    c0: f64,
    output_weights: [f64; 2],
) -> Result<Matrix2<f64>> {
    if !is_observable(a, c) {
        return Err(Error::ObserverDesign("(A, C) is not observable".into()));
    }
    let w = RowVector2::new(output_weights[0], output_weights[1]);
    let cw = w * c;
    let cwa = cw * a;
    let obs = Matrix2::new(cw[0], cw[1], cwa[0], cwa[1]);
    let scale = obs.abs().max().powi(2);
    if !(obs.determinant().abs() > scale * 1e-12) {
        return Err(Error::ObserverDesign(format!(
            "output blend {output_weights:?} leaves (A, w'C) unobservable"
        )));
    }
    let obs_inv = obs
        .try_inverse()
        .ok_or_else(|| Error::ObserverDesign("singular observability matrix".into()))?;
    let char_at_a = a * a + a * c1 + Matrix2::identity() * c0;
    let k = char_at_a * obs_inv * Vector2::new(0.0, 1.0);
    Ok(k * w)
}

/// Observer configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverConfig {
    pub poles: [f64; 2],
    pub output_weights: [f64; 2],
    /// Overwrite the first estimate with the measured sideslip difference.
    pub hybrid: bool,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            poles: DEFAULT_POLES,
            output_weights: DEFAULT_OUTPUT_WEIGHTS,
            hybrid: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub x_hat: Vector2<f64>,
    pub gain: Matrix2<f64>,
    pub hybrid: bool,
    /// Set when the last measurement was rejected.
    pub fault: bool,
}

impl ObserverState {
    pub fn new(core: &LinearCore, cfg: &ObserverConfig) -> Result<Self> {
        let gain = design_gain(&core.a, &core.c, cfg.poles, cfg.output_weights)?;
        Ok(Self::with_gain(gain, cfg.hybrid))
    }

    pub fn with_gain(gain: Matrix2<f64>, hybrid: bool) -> Self {
        Self {
            x_hat: Vector2::zeros(),
            gain,
            hybrid,
            fault: false,
        }
    }

    /// Replace the first component with the measured sideslip difference
    /// (no-op unless hybrid mode is on).
    pub fn substitute_x1(&mut self, x1_meas: f64) {
        if self.hybrid && x1_meas.is_finite() {
            self.x_hat[0] = x1_meas;
        }
    }

    /// One Euler step of `x' = A x + B u + E + l (y - C x - D)`.
    pub fn update(&mut self, m: &CtrlModel, u: f64, y_meas: &Vector2<f64>, dt: f64) {
        if !y_meas.iter().all(|v| v.is_finite()) || !u.is_finite() {
            self.fault = true;
            return;
        }
        self.fault = false;
        let cm = &m.continuous;
        let innovation = y_meas - (cm.c * self.x_hat + cm.d);
        let x_dot = cm.a * self.x_hat + cm.b * u + cm.e + self.gain * innovation;
        self.x_hat += x_dot * dt;
    }

    pub fn estimate(&self) -> Vector2<f64> {
        self.x_hat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::VehicleParams;

    fn core(v: f64) -> LinearCore {
        LinearCore::new(&VehicleParams::default(), v).unwrap()
    }

    fn sorted_real_eigs(m: &Matrix2<f64>) -> [f64; 2] {
        let ev = m.complex_eigenvalues();
        assert!(ev[0].im.abs() < 1e-6 && ev[1].im.abs() < 1e-6, "{ev}");
        let mut r = [ev[0].re, ev[1].re];
        r.sort_by(f64::total_cmp);
        r
    }

    #[test]
    fn places_requested_poles() {
        let c = core(18.06);
        let l = design_gain(&c.a, &c.c, [-30.0, -40.0], DEFAULT_OUTPUT_WEIGHTS).unwrap();
        let closed = c.a - l * c.c;
        // characteristic polynomial coefficients are exact, eigenvalues follow
        assert!((closed.trace() + 70.0).abs() < 1e-9);
        assert!((closed.determinant() - 1200.0).abs() < 1e-9 * 1200.0);
        let eig = sorted_real_eigs(&closed);
        assert!((eig[0] + 40.0).abs() < 1e-6 && (eig[1] + 30.0).abs() < 1e-6, "{eig:?}");
    }

    #[test]
    fn places_poles_with_yaw_rate_channel() {
        let c = core(25.0);
        let l = design_gain(&c.a, &c.c, [-20.0, -50.0], [1.0, 0.0]).unwrap();
        let closed = c.a - l * c.c;
        assert!((closed.trace() + 70.0).abs() < 1e-9);
        assert!((closed.determinant() - 1000.0).abs() < 1e-9 * 1000.0);
    }

    #[test]
    fn open_loop_poles_give_zero_gain() {
        let c = core(18.06);
        // target polynomial equal to the open-loop one: trace and determinant of A
        let l =
            design_gain_for_polynomial(&c.a, &c.c, -c.a.trace(), c.a.determinant(), DEFAULT_OUTPUT_WEIGHTS).unwrap();
        let scale = design_gain(&c.a, &c.c, [-30.0, -40.0], DEFAULT_OUTPUT_WEIGHTS)
            .unwrap()
            .abs()
            .max();
        assert!(l.abs().max() < 1e-9 * scale, "{l}");

        let a = Matrix2::new(-3.0, 1.0, 0.0, -5.0);
        let cm = Matrix2::new(1.0, 0.0, 1.0, 1.0);
        let l = design_gain(&a, &cm, [-3.0, -5.0], [1.0, 0.0]).unwrap();
        assert!(l.abs().max() < 1e-12);
    }

    #[test]
    fn duplicate_poles() {
        let c = core(18.06);
        let l = design_gain(&c.a, &c.c, [-35.0, -35.0], DEFAULT_OUTPUT_WEIGHTS).unwrap();
        let closed = c.a - l * c.c;
        assert!((closed.trace() + 70.0).abs() < 1e-9);
        assert!((closed.determinant() - 1225.0).abs() < 1e-9 * 1225.0);
        // (A - lC + 35 I)^2 = 0 for a double root
        let shifted = closed + Matrix2::identity() * 35.0;
        assert!((shifted * shifted).abs().max() < 1e-6);
    }

    #[test]
    fn rejects_bad_designs() {
        let c = core(18.06);
        assert!(design_gain(&c.a, &c.c, [-30.0, 5.0], DEFAULT_OUTPUT_WEIGHTS).is_err());
        assert!(design_gain(&c.a, &c.c, [-30.0, -40.0], [0.0, 0.0]).is_err());
        let a = Matrix2::new(-1.0, 0.0, 0.0, -2.0);
        let cm = Matrix2::new(1.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            design_gain(&a, &cm, [-3.0, -4.0], [1.0, 0.0]),
            Err(Error::ObserverDesign(_))
        ));
    }

    #[test]
    fn default_design_valid_over_speed_range() {
        let mut v = 5.0;
        while v <= 40.0 {
            assert!(
                ObserverState::new(&core(v), &ObserverConfig::default()).is_ok(),
                "v = {v}"
            );
            v += 1.0;
        }
    }

    #[test]
    fn zero_innovation_is_pure_propagation() {
        let p = VehicleParams::default();
        let m = CtrlModel::new(&p, 18.06, 0.03, 0.01).unwrap();
        let mut obs = ObserverState::new(&LinearCore::new(&p, 18.06).unwrap(), &ObserverConfig::default()).unwrap();
        let x = Vector2::new(-0.002, -0.015);
        obs.x_hat = x;
        let y = m.output(&x);
        obs.update(&m, 120.0, &y, 0.005);
        let cm = &m.continuous;
        let expected = x + (cm.a * x + cm.b * 120.0 + cm.e) * 0.005;
        assert!((obs.x_hat - expected).abs().max() < 1e-15);
    }

    #[test]
    fn hybrid_substitution_is_exact() {
        let p = VehicleParams::default();
        let mut obs = ObserverState::new(&LinearCore::new(&p, 18.06).unwrap(), &ObserverConfig::default()).unwrap();
        obs.x_hat = Vector2::new(0.3, 0.1);
        obs.substitute_x1(-0.00123);
        assert_eq!(obs.x_hat[0], -0.00123);

        let mut plain = ObserverState::with_gain(obs.gain, false);
        plain.substitute_x1(0.5);
        assert_eq!(plain.x_hat[0], 0.0);
    }

    #[test]
    fn non_finite_measurement_holds_estimate() {
        let p = VehicleParams::default();
        let m = CtrlModel::new(&p, 18.06, 0.0, 0.0).unwrap();
        let mut obs = ObserverState::new(&LinearCore::new(&p, 18.06).unwrap(), &ObserverConfig::default()).unwrap();
        obs.x_hat = Vector2::new(0.01, 0.02);
        obs.update(&m, 0.0, &Vector2::new(f64::NAN, 0.0), 0.005);
        assert!(obs.fault);
        assert_eq!(obs.x_hat, Vector2::new(0.01, 0.02));
        obs.update(&m, 0.0, &Vector2::new(0.0, 0.0), 0.005);
        assert!(!obs.fault);
    }

    #[test]
    fn discrete_error_contracts_at_euler_rate() {
        // e_{k+1} = (I + dt (A - l C)) e_k for the noise-free LTI truth
        let p = VehicleParams::default();
        let m = CtrlModel::new(&p, 18.06, 0.0, 0.0).unwrap();
        let core = LinearCore::new(&p, 18.06).unwrap();
        let mut obs = ObserverState::new(
            &core,
            &ObserverConfig {
                hybrid: false,
                ..Default::default()
            },
        )
        .unwrap();
        let x = Vector2::new(0.0, 0.0);
        obs.x_hat = Vector2::new(0.01, -0.01);
        let e0 = obs.x_hat - x;
        obs.update(&m, 0.0, &m.output(&x), 0.005);
        let transition = Matrix2::identity() + (core.a - obs.gain * core.c) * 0.005;
        assert!((obs.x_hat - x - transition * e0).abs().max() < 1e-15);
    }
}
