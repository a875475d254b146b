//! Vehicle constants, the rear motor torque envelope and the understeer gain.

use crate::error::{Error, Result};

/// Physical constants of the vehicle and the controller sampling period.
///
/// Defaults reproduce the B-class test vehicle. The yaw inertia is not part of
/// that data set and defaults to `m * l_f * l_r` (dynamic index of one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Total mass [kg].
    pub mass: f64,
    /// CG to front axle [m].
    pub l_f: f64,
    /// CG to rear axle [m].
    pub l_r: f64,
    /// Front axle cornering stiffness [N/rad].
    pub c_f: f64,
    /// Rear axle cornering stiffness [N/rad].
    pub c_r: f64,
    /// Yaw moment of inertia [kg m^2].
    pub i_z: f64,
    /// Tire radius [m].
    pub r_w: f64,
    /// Track width [m].
    pub l_w: f64,
    /// Gravitational constant [m/s^2].
    pub g: f64,
    /// Control sampling period [s].
    pub t_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let mass = 1140.0;
        let l_f = 1.165;
        let l_r = 1.165;
        Self {
            mass,
            l_f,
            l_r,
            c_f: 150_000.0,
            c_r: 170_000.0,
            i_z: mass * l_f * l_r,
            r_w: 0.333,
            l_w: 1.481,
            g: 9.81,
            t_s: 0.005,
        }
    }
}

impl VehicleParams {
    /// Wheelbase `l_f + l_r` [m].
    #[inline]
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("vehicle.m", self.mass),
            ("vehicle.l_f", self.l_f),
            ("vehicle.l_r", self.l_r),
            ("vehicle.C_f", self.c_f),
            ("vehicle.C_r", self.c_r),
            ("vehicle.I_z", self.i_z),
            ("vehicle.r_w", self.r_w),
            ("vehicle.l_w", self.l_w),
            ("vehicle.g", self.g),
            ("vehicle.T_s", self.t_s),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, value, "finite and strictly positive"));
            }
        }
        Ok(())
    }

    /// Validated copy, for use after field overrides.
    pub fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

/// Understeer gain `m l_r / (C_f L) - m l_f / (C_r L)` [s^2/m].
///
/// Positive values classify the vehicle as understeering.
pub fn understeer_gain(p: &VehicleParams) -> f64 {
    let l = p.wheelbase();
    p.mass * p.l_r / (p.c_f * l) - p.mass * p.l_f / (p.c_r * l)
}

/// Static torque-vs-speed envelope of one in-wheel motor.
///
/// The envelope is a knot table of (wheel speed [rad/s], peak torque [N m]),
/// linearly interpolated and clamped outside its range. The negative limit is
/// the mirror image of the positive one.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorTorqueCurve {
    t_base: f64,
    p_max: f64,
    knots: Vec<(f64, f64)>,
}

impl Default for MotorTorqueCurve {
    fn default() -> Self {
        // 250 km/h road speed on the default tire radius.
        Self::from_envelope(300.0, 40_000.0, 210.0, 16).expect("default envelope is valid")
    }
}

impl MotorTorqueCurve {
    /// Constant `t_base` up to the base speed `p_max / t_base`, then the
    /// constant-power hyperbola `p_max / omega` sampled at `n_power_knots`
    /// evenly spaced speeds up to `omega_max`.
    pub fn from_envelope(t_base: f64, p_max: f64, omega_max: f64, n_power_knots: usize) -> Result<Self> {
        if !(t_base.is_finite() && t_base > 0.0) {
            return Err(Error::invalid("motor.T_base", t_base, "finite and strictly positive"));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::invalid("motor.P_max", p_max, "finite and strictly positive"));
        }
        let omega_base = p_max / t_base;
        let mut knots = vec![(0.0, t_base), (omega_base, t_base)];
        if omega_max > omega_base && n_power_knots > 0 {
            let span = omega_max - omega_base;
            for i in 1..=n_power_knots {
                let omega = omega_base + span * i as f64 / n_power_knots as f64;
                knots.push((omega, p_max / omega));
            }
        }
        let mut curve = Self::from_table(knots)?;
        curve.t_base = t_base;
        curve.p_max = p_max;
        Ok(curve)
    }

    /// Arbitrary knot table. Speeds must start at zero and increase strictly;
    /// torques must be non-negative and non-increasing.
    pub fn from_table(knots: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(first_omega, first_torque)) = knots.first() else {
            return Err(Error::InvalidValue {
                key: "motor.table".into(),
                message: "table is empty".into(),
            });
        };
        if first_omega != 0.0 {
            return Err(Error::invalid("motor.table[0].omega", first_omega, "zero"));
        }
        for pair in knots.windows(2) {
            let ((w0, t0), (w1, t1)) = (pair[0], pair[1]);
            if !(w1 > w0) {
                return Err(Error::invalid("motor.table.omega", w1, "strictly increasing"));
            }
            if t1 > t0 {
                return Err(Error::invalid("motor.table.torque", t1, "non-increasing in speed"));
            }
        }
        if let Some(&(_, t)) = knots.iter().find(|(_, t)| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("motor.table.torque", t, "finite and non-negative"));
        }
        let t_base = first_torque;
        let p_max = knots.iter().map(|&(w, t)| w * t).fold(0.0, f64::max);
        Ok(Self { t_base, p_max, knots })
    }

    pub fn t_base(&self) -> f64 {
        self.t_base
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Peak torque at wheel speed `omega` [rad/s].
    pub fn torque_at_wheel_speed(&self, omega: f64) -> f64 {
        let omega = omega.abs();
        let last = self.knots[self.knots.len() - 1];
        if omega >= last.0 {
            return last.1;
        }
        // first knot index with speed > omega; never 0 because knots[0].0 == 0
        let hi = self.knots.partition_point(|&(w, _)| w <= omega);
        let (w0, t0) = self.knots[hi - 1];
        let (w1, t1) = self.knots[hi];
        if omega == w0 {
            return t0;
        }
        t0 + (t1 - t0) * (omega - w0) / (w1 - w0)
    }

    /// Peak torque at road speed `v_x` [m/s] for tire radius `r_w` [m].
    pub fn max_motor_torque(&self, v_x: f64, r_w: f64) -> f64 {
        self.torque_at_wheel_speed(v_x.max(0.0) / r_w)
    }

    /// Negative limit, the mirror of [`Self::max_motor_torque`].
    pub fn min_motor_torque(&self, v_x: f64, r_w: f64) -> f64 {
        -self.max_motor_torque(v_x, r_w)
    }
}
