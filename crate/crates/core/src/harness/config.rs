//! Flat `key = value` configuration files.
//!
//! One parameter per line, `#` starts a comment, keys are namespaced
//! (`vehicle.m`, `mpc.N`, `scenario.mu`, ...). Angles are given in degrees
//! wherever the key ends in `_deg`. Unknown keys are rejected.

use std::path::Path;

use crate::allocation::InputBoundMode;
use crate::baseline::SlidingConfig;
use crate::error::{Error, Result};
use crate::mpc::MpcConfig;
use crate::observer::ObserverConfig;
use crate::params::{MotorTorqueCurve, VehicleParams};
use crate::plant::{DEFAULT_POST_SLOPE_RATIO, FRONT_ALPHA_P_REF, REAR_ALPHA_P_REF};

use super::scenario::{Driver, PathFollower, ReferencePath, Scenario, SteerProfile};

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Tire-law settings shared by both axles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireConfig {
    pub alpha_p_front: f64,
    pub alpha_p_rear: f64,
    /// Post-saturation slope as a fraction of the cornering stiffness.
    pub post_slope_ratio: f64,
}

impl Default for TireConfig {
    fn default() -> Self {
        Self {
            alpha_p_front: FRONT_ALPHA_P_REF,
            alpha_p_rear: REAR_ALPHA_P_REF,
            post_slope_ratio: DEFAULT_POST_SLOPE_RATIO,
        }
    }
}

/// Everything one closed-loop run needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimConfig {
    pub vehicle: VehicleParams,
    pub motor: MotorTorqueCurve,
    pub tire: TireConfig,
    pub mpc: MpcConfig,
    pub input_bound: InputBoundMode,
    pub observer: ObserverConfig,
    pub baseline: SlidingConfig,
    pub scenario: Scenario,
}

/// Raw `(line, key, value)` entries of a config text.
pub fn parse_entries(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "empty key or value".into(),
            });
        }
        entries.push((idx + 1, key.to_string(), value.to_string()));
    }
    Ok(entries)
}

fn number(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|e| Error::InvalidValue {
        key: key.into(),
        message: format!("`{value}` is not a number ({e})"),
    })
}

fn integer(key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|e| Error::InvalidValue {
        key: key.into(),
        message: format!("`{value}` is not a non-negative integer ({e})"),
    })
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidValue {
            key: key.into(),
            message: format!("`{value}` is not a boolean"),
        }),
    }
}

/// `a:b, c:d, ...` pairs.
fn pairs(key: &str, value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| Error::InvalidValue {
                key: key.into(),
                message: format!("expected `a:b` pairs, got `{item}`"),
            })?;
            Ok((number(key, a.trim())?, number(key, b.trim())?))
        })
        .collect()
}

/// Settings that only become concrete once every key has been read.
#[derive(Debug, Clone, Default)]
struct Pending {
    i_z: Option<f64>,
    motor_t_base: Option<f64>,
    motor_p_max: Option<f64>,
    motor_omega_max: Option<f64>,
    motor_table: Option<Vec<(f64, f64)>>,
    steer_kind: Option<String>,
    steer_angle: Option<f64>,
    steer_start: Option<f64>,
    steer_ramp: Option<f64>,
    steer_frequency: Option<f64>,
    steer_dwell: Option<f64>,
    steer_table: Option<Vec<(f64, f64)>>,
    driver_kind: Option<String>,
    driver_preview: Option<f64>,
    driver_gain: Option<f64>,
    driver_max_rate: Option<f64>,
    driver_max_steer: Option<f64>,
    path_kind: Option<String>,
    path_entry: Option<f64>,
    path_transition: Option<f64>,
    path_middle: Option<f64>,
    path_offset: Option<f64>,
    path_points: Option<Vec<(f64, f64)>>,
    baseline_zeta: Option<f64>,
}

/// Builder that applies keys one at a time on top of the defaults.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    cfg: SimConfig,
    pending: Pending,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self> {
        let cfg = &mut self.cfg;
        let pd = &mut self.pending;
        let num = || number(key, value);
        let deg = || number(key, value).map(|v| v * DEG);
        match key {
            "vehicle.m" => cfg.vehicle.mass = num()?,
            "vehicle.l_f" => cfg.vehicle.l_f = num()?,
            "vehicle.l_r" => cfg.vehicle.l_r = num()?,
            "vehicle.C_f" | "vehicle.c_f" => cfg.vehicle.c_f = num()?,
            "vehicle.C_r" | "vehicle.c_r" => cfg.vehicle.c_r = num()?,
            "vehicle.I_z" | "vehicle.i_z" => pd.i_z = Some(num()?),
            "vehicle.r_w" => cfg.vehicle.r_w = num()?,
            "vehicle.l_w" => cfg.vehicle.l_w = num()?,
            "vehicle.g" => cfg.vehicle.g = num()?,
            "vehicle.T_s" | "vehicle.t_s" => cfg.vehicle.t_s = num()?,

            "motor.T_base" | "motor.t_base" => pd.motor_t_base = Some(num()?),
            "motor.P_max" | "motor.p_max" => pd.motor_p_max = Some(num()?),
            "motor.omega_max" => pd.motor_omega_max = Some(num()?),
            "motor.table" => pd.motor_table = Some(pairs(key, value)?),

            "tire.alpha_p_front_deg" => cfg.tire.alpha_p_front = deg()?,
            "tire.alpha_p_rear_deg" => cfg.tire.alpha_p_rear = deg()?,
            "tire.post_slope_ratio" => cfg.tire.post_slope_ratio = num()?,

            "mpc.N" | "mpc.horizon" => cfg.mpc.horizon = integer(key, value)? as usize,
            "mpc.q1" => cfg.mpc.q[0] = num()?,
            "mpc.q2" => cfg.mpc.q[1] = num()?,
            "mpc.r" | "mpc.R" => cfg.mpc.r = num()?,
            "mpc.w" | "mpc.W" => cfg.mpc.w = num()?,
            "mpc.zeta_deg" => cfg.mpc.zeta = deg()?,
            "mpc.alpha_r_des_deg" => cfg.mpc.alpha_r_des = deg()?,
            "mpc.zeta_min_deg" => cfg.mpc.zeta_min = deg()?,
            "mpc.zeta_max_deg" => cfg.mpc.zeta_max = deg()?,
            "mpc.alpha_r_min_deg" => cfg.mpc.alpha_r_min = deg()?,
            "mpc.alpha_r_max_deg" => cfg.mpc.alpha_r_max = deg()?,
            "mpc.slack_penalty" => cfg.mpc.slack_penalty = num()?,
            "mpc.input_bound" => {
                cfg.input_bound = match value {
                    "two-wheel" => InputBoundMode::TwoWheel,
                    "single-wheel" => InputBoundMode::SingleWheel,
                    _ => {
                        return Err(Error::InvalidValue {
                            key: key.into(),
                            message: format!("expected two-wheel|single-wheel, got `{value}`"),
                        })
                    }
                }
            }

            "observer.pole1" => cfg.observer.poles[0] = num()?,
            "observer.pole2" => cfg.observer.poles[1] = num()?,
            "observer.w_r" => cfg.observer.output_weights[0] = num()?,
            "observer.w_ay" => cfg.observer.output_weights[1] = num()?,
            "observer.hybrid" => cfg.observer.hybrid = boolean(key, value)?,

            "baseline.lambda" => cfg.baseline.lambda = num()?,
            "baseline.zeta_deg" => pd.baseline_zeta = Some(deg()?),

            "scenario.name" => cfg.scenario.name = value.to_string(),
            "scenario.mu" => cfg.scenario.mu = num()?,
            "scenario.v_x" => cfg.scenario.v_x = num()?,
            "scenario.v_kmh" => cfg.scenario.v_x = num()? / 3.6,
            "scenario.duration" => cfg.scenario.duration = num()?,
            "scenario.control_enable_time" => cfg.scenario.control_enable_time = num()?,
            "scenario.controller" => cfg.scenario.controller = value.parse()?,
            "scenario.substeps" => cfg.scenario.substeps = integer(key, value)? as usize,

            "sensor.yaw_rate_noise" => cfg.scenario.noise.yaw_rate = num()?,
            "sensor.ay_noise" => cfg.scenario.noise.lateral_acceleration = num()?,
            "sensor.seed" | "scenario.seed" => cfg.scenario.noise.seed = integer(key, value)?,

            "steer.profile" => pd.steer_kind = Some(value.to_string()),
            "steer.angle_deg" => pd.steer_angle = Some(deg()?),
            "steer.start" => pd.steer_start = Some(num()?),
            "steer.ramp_time" => pd.steer_ramp = Some(num()?),
            "steer.frequency" => pd.steer_frequency = Some(num()?),
            "steer.dwell_time" => pd.steer_dwell = Some(num()?),
            "steer.table_deg" => {
                pd.steer_table = Some(pairs(key, value)?.into_iter().map(|(t, a)| (t, a * DEG)).collect())
            }
            "steer.rate_filter" => cfg.scenario.steer_rate_filter = num()?,

            "driver.model" => pd.driver_kind = Some(value.to_string()),
            "driver.preview" => pd.driver_preview = Some(num()?),
            "driver.gain" => pd.driver_gain = Some(num()?),
            "driver.max_rate_deg" => pd.driver_max_rate = Some(deg()?),
            "driver.max_steer_deg" => pd.driver_max_steer = Some(deg()?),

            "path.kind" => pd.path_kind = Some(value.to_string()),
            "path.entry" => pd.path_entry = Some(num()?),
            "path.transition" => pd.path_transition = Some(num()?),
            "path.middle" => pd.path_middle = Some(num()?),
            "path.offset" => pd.path_offset = Some(num()?),
            "path.points" => pd.path_points = Some(pairs(key, value)?),

            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(self)
    }

    pub fn build(&self) -> Result<SimConfig> {
        let mut cfg = self.cfg.clone();
        let pd = &self.pending;
        let v = &mut cfg.vehicle;
        v.i_z = pd.i_z.unwrap_or(v.mass * v.l_f * v.l_r);
        v.validate()?;

        cfg.motor = match &pd.motor_table {
            Some(table) => MotorTorqueCurve::from_table(table.clone())?,
            None if pd.motor_t_base.is_some() || pd.motor_p_max.is_some() || pd.motor_omega_max.is_some() => {
                MotorTorqueCurve::from_envelope(
                    pd.motor_t_base.unwrap_or(300.0),
                    pd.motor_p_max.unwrap_or(40_000.0),
                    pd.motor_omega_max.unwrap_or(210.0),
                    16,
                )?
            }
            None => cfg.motor,
        };

        cfg.baseline.zeta = pd.baseline_zeta.unwrap_or(cfg.mpc.zeta);
        cfg.scenario.steer = build_steer(pd, &cfg.scenario.steer)?;
        cfg.scenario.driver = build_driver(pd, cfg.vehicle.wheelbase(), cfg.scenario.v_x)?;

        cfg.mpc.validate()?;
        cfg.baseline.validate()?;
        cfg.scenario.validate()?;
        Ok(cfg)
    }
}

fn build_steer(pd: &Pending, current: &SteerProfile) -> Result<SteerProfile> {
    let default_angle = 2.0 * DEG;
    let kind = match pd.steer_kind.as_deref() {
        Some(k) => k,
        None if pd.steer_angle.is_none() && pd.steer_start.is_none() && pd.steer_ramp.is_none() => {
            return Ok(current.clone());
        }
        None => "ramp-hold",
    };
    let angle = pd.steer_angle.unwrap_or(default_angle);
    let start = pd.steer_start.unwrap_or(0.5);
    Ok(match kind {
        "constant" => SteerProfile::Constant { angle },
        "ramp-hold" => SteerProfile::RampHold {
            angle,
            start,
            ramp: pd.steer_ramp.unwrap_or(1.0),
        },
        "sine-dwell" => SteerProfile::SineDwell {
            angle,
            start,
            frequency: pd.steer_frequency.unwrap_or(0.7),
            dwell: pd.steer_dwell.unwrap_or(0.5),
        },
        "table" => SteerProfile::Table(pd.steer_table.clone().ok_or_else(|| Error::InvalidValue {
            key: "steer.table_deg".into(),
            message: "required for steer.profile = table".into(),
        })?),
        other => {
            return Err(Error::InvalidValue {
                key: "steer.profile".into(),
                message: format!("expected constant|ramp-hold|sine-dwell|table, got `{other}`"),
            })
        }
    })
}

/// Preview gain that matches a pure-pursuit geometric law at the given preview.
pub fn default_driver_gain(wheelbase: f64, v_x: f64, preview: f64) -> f64 {
    2.0 * wheelbase / (v_x * preview)
}

fn build_driver(pd: &Pending, wheelbase: f64, v_x: f64) -> Result<Driver> {
    match pd.driver_kind.as_deref().unwrap_or("none") {
        "none" => Ok(Driver::OpenLoop),
        "path-follower" => {
            let path = match pd.path_kind.as_deref().unwrap_or("double-lane-change") {
                "double-lane-change" => ReferencePath::double_lane_change(
                    pd.path_entry.unwrap_or(30.0),
                    pd.path_transition.unwrap_or(25.0),
                    pd.path_middle.unwrap_or(25.0),
                    pd.path_offset.unwrap_or(3.5),
                    0.5,
                )?,
                "table" => ReferencePath::new(pd.path_points.clone().ok_or_else(|| Error::InvalidValue {
                    key: "path.points".into(),
                    message: "required for path.kind = table".into(),
                })?)?,
                other => {
                    return Err(Error::InvalidValue {
                        key: "path.kind".into(),
                        message: format!("expected double-lane-change|table, got `{other}`"),
                    })
                }
            };
            let preview = pd.driver_preview.unwrap_or(DEFAULT_PREVIEW);
            Ok(Driver::PathFollower(PathFollower {
                path,
                preview,
                gain: pd
                    .driver_gain
                    .unwrap_or_else(|| default_driver_gain(wheelbase, v_x, preview)),
                max_rate: pd.driver_max_rate.unwrap_or(DEFAULT_MAX_STEER_RATE),
                max_steer: pd.driver_max_steer.unwrap_or(DEFAULT_MAX_STEER),
            }))
        }
        other => Err(Error::InvalidValue {
            key: "driver.model".into(),
            message: format!("expected none|path-follower, got `{other}`"),
        }),
    }
}

/// Default preview time of the path follower [s].
pub const DEFAULT_PREVIEW: f64 = 0.5;
/// Default road-wheel steer rate limit [rad/s].
pub const DEFAULT_MAX_STEER_RATE: f64 = 20.0 * DEG;
/// Default road-wheel steer limit [rad].
pub const DEFAULT_MAX_STEER: f64 = 10.0 * DEG;

impl SimConfig {
    /// Parse config text on top of the defaults.
    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        Self::from_text_with(text, path, &[])
    }

    /// Parse config text and then apply `overrides` as extra `key = value` pairs.
    pub fn from_text_with(text: &str, path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut builder = ConfigBuilder::new();
        for (line, key, value) in parse_entries(text, path)? {
            builder.set(&key, &value).map_err(|e| Error::Config {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
        }
        for (key, value) in overrides {
            builder.set(key, value)?;
        }
        builder.build()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_file_with(path, &[])
    }

    pub fn from_file_with(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text_with(&text, path, overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::ControllerKind;

    fn parse(text: &str) -> Result<SimConfig> {
        SimConfig::from_text(text, Path::new("test.cfg"))
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse("# nothing\n\n").unwrap(), SimConfig::default());
    }

    #[test]
    fn reads_namespaced_keys() {
        let cfg = parse(
            "vehicle.m = 1200   # heavier\n\
             mpc.N = 8\n\
             mpc.zeta_deg = 0.1\n\
             scenario.mu = 0.5\n\
             scenario.controller = mpc\n\
             steer.profile = sine-dwell\n\
             steer.angle_deg = 3\n\
             observer.hybrid = false\n",
        )
        .unwrap();
        assert_eq!(cfg.vehicle.mass, 1200.0);
        assert!((cfg.vehicle.i_z - 1200.0 * 1.165 * 1.165).abs() < 1e-9);
        assert_eq!(cfg.mpc.horizon, 8);
        assert!((cfg.mpc.zeta - 0.1 * DEG).abs() < 1e-15);
        assert_eq!(cfg.baseline.zeta, cfg.mpc.zeta);
        assert_eq!(cfg.scenario.mu, 0.5);
        assert_eq!(cfg.scenario.controller, ControllerKind::Mpc);
        assert!(matches!(cfg.scenario.steer, SteerProfile::SineDwell { .. }));
        assert!(!cfg.observer.hybrid);
    }

    #[test]
    fn explicit_inertia_wins() {
        let cfg = parse("vehicle.I_z = 1800\nvehicle.m = 1000").unwrap();
        assert_eq!(cfg.vehicle.i_z, 1800.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("scenario.mu = 0.5\nmpc.bogus = 1\n") {
            Err(Error::Config { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("mpc.bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("no equals sign"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse("scenario.mu = abc"), Err(Error::Config { .. })));
    }

    #[test]
    fn validation_runs_after_parsing() {
        assert!(parse("scenario.mu = 1.5").is_err());
        assert!(parse("vehicle.m = -1").is_err());
        assert!(parse("mpc.N = 0").is_err());
    }

    #[test]
    fn path_follower_and_tables() {
        let cfg = parse(
            "driver.model = path-follower\n\
             path.offset = 3.5\n\
             motor.table = 0:300, 100:300, 200:150\n\
             steer.profile = table\n\
             steer.table_deg = 0:0, 1:2, 2:0\n",
        )
        .unwrap();
        let Driver::PathFollower(f) = &cfg.scenario.driver else {
            panic!("expected a path follower");
        };
        assert!((f.path.lateral_at(30.0 + 37.5) - 3.5).abs() < 1e-12);
        assert_eq!(cfg.motor.knots().len(), 3);
        assert!((cfg.scenario.steer.angle_at(0.5) - 1.0 * DEG).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply_last() {
        let cfg = SimConfig::from_text_with(
            "scenario.mu = 0.85",
            Path::new("x"),
            &[("scenario.mu".into(), "0.5".into())],
        )
        .unwrap();
        assert_eq!(cfg.scenario.mu, 0.5);
    }
}
