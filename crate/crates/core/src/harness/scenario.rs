//! Scenario description: road, speed, steering source and controller choice.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plant::{PlantState, MAX_ROAD_WHEEL_ANGLE};

const DEG: f64 = PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControllerKind {
    #[default]
    None,
    Mpc,
    Conventional,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::None => "none",
            ControllerKind::Mpc => "mpc",
            ControllerKind::Conventional => "conventional",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ControllerKind::None),
            "mpc" => Ok(ControllerKind::Mpc),
            "conventional" => Ok(ControllerKind::Conventional),
            other => Err(Error::InvalidValue {
                key: "scenario.controller".into(),
                message: format!("expected none|mpc|conventional, got `{other}`"),
            }),
        }
    }
}

/// Open-loop road-wheel steer as a function of time. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub enum SteerProfile {
    Constant {
        angle: f64,
    },
    /// Zero until `start`, linear ramp to `angle` over `ramp`, then held.
    RampHold {
        angle: f64,
        start: f64,
        ramp: f64,
    },
    /// Three quarters of a sine period at `frequency`, a dwell at the
    /// negative peak, then the last quarter back to zero.
    SineDwell {
        angle: f64,
        start: f64,
        frequency: f64,
        dwell: f64,
    },
    /// Piecewise-linear `(t, angle)` table, held at the ends.
    Table(Vec<(f64, f64)>),
}

impl Default for SteerProfile {
    fn default() -> Self {
        SteerProfile::RampHold {
            angle: 2.0 * DEG,
            start: 0.5,
            ramp: 1.0,
        }
    }
}

impl SteerProfile {
    pub fn angle_at(&self, t: f64) -> f64 {
        match *self {
            SteerProfile::Constant { angle } => angle,
            SteerProfile::RampHold { angle, start, ramp } => {
                if t <= start {
                    0.0
                } else if ramp <= 0.0 || t >= start + ramp {
                    angle
                } else {
                    angle * (t - start) / ramp
                }
            }
            SteerProfile::SineDwell {
                angle,
                start,
                frequency,
                dwell,
            } => {
                let period = 1.0 / frequency;
                let tau = t - start;
                let w = 2.0 * PI * frequency;
                if tau <= 0.0 {
                    0.0
                } else if tau < 0.75 * period {
                    angle * (w * tau).sin()
                } else if tau < 0.75 * period + dwell {
                    -angle
                } else if tau < period + dwell {
                    angle * (w * (tau - dwell)).sin()
                } else {
                    0.0
                }
            }
            SteerProfile::Table(ref points) => interpolate(points, t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_angle = |a: f64| {
            if a.is_finite() && a.abs() <= MAX_ROAD_WHEEL_ANGLE {
                Ok(())
            } else {
                Err(Error::invalid("steer.angle", a, "finite and within the steering stop"))
            }
        };
        match *self {
            SteerProfile::Constant { angle } => check_angle(angle),
            SteerProfile::RampHold { angle, start, ramp } => {
                check_angle(angle)?;
                if !(start >= 0.0 && ramp >= 0.0) {
                    return Err(Error::invalid(
                        "steer.ramp",
                        ramp,
                        "non-negative with a non-negative start",
                    ));
                }
                Ok(())
            }
            SteerProfile::SineDwell {
                angle,
                start,
                frequency,
                dwell,
            } => {
                check_angle(angle)?;
                if !(frequency.is_finite() && frequency > 0.0) {
                    return Err(Error::invalid("steer.frequency", frequency, "finite and > 0"));
                }
                if !(start >= 0.0 && dwell >= 0.0) {
                    return Err(Error::invalid(
                        "steer.dwell",
                        dwell,
                        "non-negative with a non-negative start",
                    ));
                }
                Ok(())
            }
            SteerProfile::Table(ref points) => {
                validate_table("steer.table", points)?;
                points.iter().try_for_each(|&(_, a)| check_angle(a))
            }
        }
    }
}

fn validate_table(key: &str, points: &[(f64, f64)]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidValue {
            key: key.into(),
            message: "table is empty".into(),
        });
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidValue {
            key: key.into(),
            message: "abscissae must increase strictly".into(),
        });
    }
    Ok(())
}

/// Linear interpolation in a sorted table, constant beyond the ends.
pub fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let hi = points.partition_point(|&(px, _)| px <= x);
    let (x0, y0) = points[hi - 1];
    let (x1, y1) = points[hi];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Reference path as lateral offset over longitudinal position, piecewise linear.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    pub points: Vec<(f64, f64)>,
}

impl ReferencePath {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        validate_table("path.points", &points)?;
        Ok(Self { points })
    }

    /// Double lane change: straight entry up to `entry`, a smooth move to
    /// `offset` over `transition`, a straight `middle` section, the move back
    /// over `transition`, then straight. The smooth moves are half-cosines
    /// sampled every `spacing` metres.
    pub fn double_lane_change(entry: f64, transition: f64, middle: f64, offset: f64, spacing: f64) -> Result<Self> {
        if !(transition > 0.0 && middle >= 0.0 && entry >= 0.0 && spacing > 0.0 && offset.is_finite()) {
            return Err(Error::InvalidValue {
                key: "path".into(),
                message: "lane-change geometry must be non-negative with positive transition and spacing".into(),
            });
        }
        let n = (transition / spacing).ceil().max(1.0) as usize;
        let blend = |i: usize| 0.5 * (1.0 - (PI * i as f64 / n as f64).cos());
        let mut points = vec![(0.0_f64.min(entry - 1.0), 0.0)];
        let back = entry + transition + middle;
        for i in 0..=n {
            points.push((entry + transition * i as f64 / n as f64, offset * blend(i)));
        }
        for i in 0..=n {
            points.push((back + transition * i as f64 / n as f64, offset * (1.0 - blend(i))));
        }
        points.push((back + transition + 100.0, 0.0));
        points.dedup_by(|a, b| a.0 <= b.0);
        Self::new(points)
    }

    pub fn lateral_at(&self, x: f64) -> f64 {
        interpolate(&self.points, x)
    }

    /// Longitudinal extent covered by the table.
    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }
}

/// Single-point preview driver: steers proportionally to the lateral error
/// at a point `preview` seconds ahead along the current course.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFollower {
    pub path: ReferencePath,
    /// Preview time [s].
    pub preview: f64,
    /// Proportional gain [-] applied to (lateral error / preview distance).
    pub gain: f64,
    /// Steering rate limit [rad/s].
    pub max_rate: f64,
    /// Steering magnitude limit [rad].
    pub max_steer: f64,
}

impl PathFollower {
    pub fn validate(&self) -> Result<()> {
        if !(self.preview.is_finite() && self.preview > 0.0) {
            return Err(Error::invalid("driver.preview", self.preview, "finite and > 0"));
        }
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::invalid("driver.gain", self.gain, "finite and >= 0"));
        }
        if !(self.max_rate > 0.0) {
            return Err(Error::invalid("driver.max_rate", self.max_rate, "> 0"));
        }
        if !(self.max_steer > 0.0 && self.max_steer <= MAX_ROAD_WHEEL_ANGLE) {
            return Err(Error::invalid(
                "driver.max_steer",
                self.max_steer,
                "in (0, steering stop]",
            ));
        }
        Ok(())
    }

    /// Lateral error of the preview point, positive when the path lies to the left.
    pub fn preview_error(&self, s: &PlantState) -> f64 {
        let distance = s.v_x * self.preview;
        let course = s.psi + s.beta;
        let (sin_c, cos_c) = course.sin_cos();
        let px = s.x + distance * cos_c;
        let py = s.y + distance * sin_c;
        self.path.lateral_at(px) - py
    }

    /// Unconstrained steering command [rad].
    pub fn desired_steer(&self, s: &PlantState) -> f64 {
        self.gain * self.preview_error(s) / (s.v_x * self.preview)
    }

    /// Steering command after the magnitude and rate limits.
    pub fn steer(&self, s: &PlantState, previous: f64, dt: f64) -> f64 {
        let target = self.desired_steer(s).clamp(-self.max_steer, self.max_steer);
        let step = self.max_rate * dt;
        target.clamp(previous - step, previous + step)
    }

    /// Absolute lateral deviation of the CG from the path [m].
    pub fn path_error(&self, s: &PlantState) -> f64 {
        (s.y - self.path.lateral_at(s.x)).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Driver {
    /// Steering comes from the open-loop profile.
    #[default]
    OpenLoop,
    PathFollower(PathFollower),
}

/// Zero-mean Gaussian noise on the two measured outputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorNoise {
    /// Yaw-rate noise standard deviation [rad/s].
    pub yaw_rate: f64,
    /// Lateral-acceleration noise standard deviation [m/s^2].
    pub lateral_acceleration: f64,
    pub seed: u64,
}

impl SensorNoise {
    pub fn is_active(&self) -> bool {
        self.yaw_rate > 0.0 || self.lateral_acceleration > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Road friction coefficient [-].
    pub mu: f64,
    /// Longitudinal speed [m/s].
    pub v_x: f64,
    pub steer: SteerProfile,
    pub driver: Driver,
    pub controller: ControllerKind,
    /// Simulated time [s].
    pub duration: f64,
    /// The controller output is zero before this time [s].
    pub control_enable_time: f64,
    /// Plant integration steps per control period.
    pub substeps: usize,
    /// Time constant of the steer-rate filter [s].
    pub steer_rate_filter: f64,
    pub noise: SensorNoise,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "mild".into(),
            mu: 0.85,
            v_x: 65.0 / 3.6,
            steer: SteerProfile::default(),
            driver: Driver::OpenLoop,
            controller: ControllerKind::None,
            duration: 4.5,
            control_enable_time: 1.0,
            substeps: 5,
            steer_rate_filter: 0.02,
            noise: SensorNoise::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.2) {
            return Err(Error::invalid("scenario.mu", self.mu, "in (0, 1.2]"));
        }
        if !(self.v_x.is_finite() && self.v_x > 0.0) {
            return Err(Error::NonPositiveSpeed(self.v_x));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("scenario.duration", self.duration, "finite and > 0"));
        }
        if !(self.control_enable_time >= 0.0) {
            return Err(Error::invalid(
                "scenario.control_enable_time",
                self.control_enable_time,
                ">= 0",
            ));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("scenario.substeps", 0.0, ">= 1"));
        }
        if !(self.steer_rate_filter >= 0.0) {
            return Err(Error::invalid("steer.rate_filter", self.steer_rate_filter, ">= 0"));
        }
        if !(self.noise.yaw_rate >= 0.0 && self.noise.lateral_acceleration >= 0.0) {
            return Err(Error::invalid(
                "sensor.noise",
                self.noise.yaw_rate.min(self.noise.lateral_acceleration),
                ">= 0",
            ));
        }
        self.steer.validate()?;
        if let Driver::PathFollower(f) = &self.driver {
            f.validate()?;
        }
        Ok(())
    }
}
