//! Closed-loop orchestration: plant -> sensors -> observer -> controller ->
//! allocation -> plant, one record per control period.

use std::io::Write;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::allocation::{allocate, Branch};
use crate::baseline::{control_law, SlidingInputs};
use crate::ctrl_model::{measure_x1, CtrlModel, LinearCore, SteerRateEstimator};
use crate::error::Result;
use crate::mpc::MpcController;
use crate::observer::ObserverState;
use crate::plant::{DriverInput, Plant, PlantFault, PlantState, TireCurve};

use super::config::SimConfig;
use super::metrics::RunSummary;
use super::scenario::{ControllerKind, Driver};

/// Bits of [`TelemetryRecord::flags`].
pub mod flags {
    /// Controller output is being applied.
    pub const CONTROL_ACTIVE: u32 = 1;
    /// Commanded yaw moment is at the input bound.
    pub const INPUT_AT_BOUND: u32 = 1 << 1;
    /// The MPC softened a state bound.
    pub const SLACK_ACTIVE: u32 = 1 << 2;
    /// QP stopped at its iteration limit.
    pub const SOLVER_DEGRADED: u32 = 1 << 3;
    /// Controller or observer rejected its inputs; zero moment applied.
    pub const CONTROLLER_FAULT: u32 = 1 << 4;
    /// Requested moment exceeded what both motors can deliver.
    pub const ALLOCATION_SHORTFALL: u32 = 1 << 5;
    /// Braking torque used on one wheel.
    pub const NEGATIVE_TORQUE: u32 = 1 << 6;
    /// Plant diverged during the following period; the run ends here.
    pub const PLANT_FAULT: u32 = 1 << 7;
}

/// Relative tolerance for "at the bound".
pub const AT_BOUND_TOLERANCE: f64 = 1e-9;

/// Violations of a state bound smaller than this are numerical noise [rad].
pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub delta_f: f64,
    pub v_x: f64,
    pub beta: f64,
    pub r: f64,
    pub a_y: f64,
    pub alpha_f: f64,
    pub alpha_r: f64,
    /// Measured sideslip difference.
    pub x1: f64,
    /// Estimated rear sideslip.
    pub x2_hat: f64,
    pub m_z: f64,
    pub t_rl: f64,
    pub t_rr: f64,
    pub slack: f64,
    pub solver_iters: usize,
    pub flags: u32,
}

impl TelemetryRecord {
    pub const HEADER: &'static str =
        "t,delta_f,v_x,beta,r,a_y,alpha_f,alpha_r,x1,x2_hat,M_z,T_rl,T_rr,slack,solver_iters,flags";

    pub fn has(&self, flag: u32) -> bool {
        self.flags & flag != 0
    }

    pub fn csv_row(&self) -> String {
        let reals = [
            self.t,
            self.delta_f,
            self.v_x,
            self.beta,
            self.r,
            self.a_y,
            self.alpha_f,
            self.alpha_r,
            self.x1,
            self.x2_hat,
            self.m_z,
            self.t_rl,
            self.t_rr,
            self.slack,
        ];
        let mut row = String::with_capacity(16 * 17);
        for v in reals {
            // nine significant digits; normalise negative zero
            let v = if v == 0.0 { 0.0 } else { v };
            row.push_str(&format!("{v:.8e},"));
        }
        row.push_str(&format!("{},{}", self.solver_iters, self.flags));
        row
    }
}

/// Write records as CSV with the fixed header.
pub fn write_csv<W: Write>(records: &[TelemetryRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", TelemetryRecord::HEADER)?;
    for rec in records {
        writeln!(out, "{}", rec.csv_row())?;
    }
    out.flush()
}

pub fn csv_string(records: &[TelemetryRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Output of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub records: Vec<TelemetryRecord>,
    pub summary: RunSummary,
    /// Input bound per record [N m].
    pub input_bounds: Vec<f64>,
    /// Lateral CG deviation from the reference path per record [m], when a
    /// path follower drives.
    pub path_errors: Vec<f64>,
    pub fault: Option<PlantFault>,
}

/// Build the plant for a configuration.
pub fn build_plant(cfg: &SimConfig) -> Result<Plant> {
    let p = cfg.vehicle;
    let mu = cfg.scenario.mu;
    let front = TireCurve::new(p.c_f, cfg.tire.alpha_p_front, cfg.tire.post_slope_ratio * p.c_f, mu)?;
    let rear = TireCurve::new(p.c_r, cfg.tire.alpha_p_rear, cfg.tire.post_slope_ratio * p.c_r, mu)?;
    Ok(Plant::new(p, front, rear))
}

enum Controller {
    None,
    Mpc(Box<MpcController>),
    Conventional,
}

/// Run the scenario of `cfg` to completion (or plant divergence).
pub fn run_scenario(cfg: &SimConfig) -> Result<RunResult> {
    cfg.vehicle.validate()?;
    cfg.scenario.validate()?;
    let sc = &cfg.scenario;
    let p = cfg.vehicle;
    let t_s = p.t_s;
    let plant = build_plant(cfg)?;
    let core = LinearCore::new(&p, sc.v_x)?;
    let mut observer = ObserverState::new(&core, &cfg.observer)?;
    let mut controller = match sc.controller {
        ControllerKind::None => Controller::None,
        ControllerKind::Mpc => Controller::Mpc(Box::new(MpcController::new(cfg.mpc)?)),
        ControllerKind::Conventional => {
            cfg.baseline.validate()?;
            Controller::Conventional
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(sc.noise.seed);
    let yaw_noise = Normal::new(0.0, sc.noise.yaw_rate.max(0.0)).expect("non-negative deviation");
    let ay_noise = Normal::new(0.0, sc.noise.lateral_acceleration.max(0.0)).expect("non-negative deviation");

    let steps = (sc.duration / t_s).round() as usize;
    let mut records = Vec::with_capacity(steps);
    let mut input_bounds = Vec::with_capacity(steps);
    let mut path_errors = Vec::new();
    let mut state = PlantState::straight(sc.v_x);
    let mut steer_rate = SteerRateEstimator::new(sc.steer_rate_filter);
    let mut delta_prev = 0.0;
    let mut u_prev = 0.0;
    let mut fault = None;

    for k in 0..steps {
        let t = k as f64 * t_s;

        let delta_f = match &sc.driver {
            Driver::OpenLoop => sc.steer.angle_at(t),
            Driver::PathFollower(f) => {
                path_errors.push(f.path_error(&state));
                f.steer(&state, delta_prev, t_s)
            }
        };
        let delta_f_dot = steer_rate.update(delta_f, t_s);
        delta_prev = delta_f;
        let input = DriverInput::new(delta_f, delta_f_dot);

        let a_y = plant.lateral_acceleration(&state, &input);
        let (mut r_meas, mut ay_meas) = (state.r, a_y);
        if sc.noise.is_active() {
            r_meas += yaw_noise.sample(&mut rng);
            ay_meas += ay_noise.sample(&mut rng);
        }
        let y_meas = Vector2::new(r_meas, ay_meas);
        let x1 = measure_x1(r_meas, input.delta_f, sc.v_x, &p);
        let model = CtrlModel::from_core(&core, &p, input.delta_f, delta_f_dot);
        observer.substitute_x1(x1);
        let x2_hat = observer.x_hat[1];

        let t_max = cfg.motor.max_motor_torque(sc.v_x, p.r_w);
        let bound = cfg.input_bound.bound(t_max, &p);
        let active = t >= sc.control_enable_time && !matches!(controller, Controller::None);
        let mut flag_bits = 0;
        let mut slack = 0.0;
        let mut iters = 0;
        let mut m_z = 0.0;
        if active {
            flag_bits |= flags::CONTROL_ACTIVE;
            match &mut controller {
                Controller::None => {}
                Controller::Mpc(mpc) => {
                    let out = mpc.control_step(x1, x2_hat, &model.discrete, u_prev, bound);
                    if out.fault {
                        flag_bits |= flags::CONTROLLER_FAULT;
                    } else {
                        m_z = out.m_z;
                        slack = out.slack;
                        iters = out.iterations;
                        if out.degraded {
                            flag_bits |= flags::SOLVER_DEGRADED;
                        }
                    }
                }
                Controller::Conventional => {
                    let inp = SlidingInputs {
                        x1,
                        delta_f_dot,
                        alpha_f: x1 + x2_hat,
                        alpha_r: x2_hat,
                        v_x: sc.v_x,
                    };
                    m_z = control_law(&inp, &p, &cfg.baseline, bound);
                    if !m_z.is_finite() {
                        m_z = 0.0;
                        flag_bits |= flags::CONTROLLER_FAULT;
                    }
                }
            }
            if observer.fault {
                flag_bits |= flags::CONTROLLER_FAULT;
            }
        }
        m_z = m_z.clamp(-bound, bound);
        if slack > SLACK_TOLERANCE {
            flag_bits |= flags::SLACK_ACTIVE;
        }
        if bound > 0.0 && m_z.abs() >= bound * (1.0 - AT_BOUND_TOLERANCE) {
            flag_bits |= flags::INPUT_AT_BOUND;
        }
        let torque = allocate(m_z, t_max, &p);
        if torque.shortfall > 0.0 {
            flag_bits |= flags::ALLOCATION_SHORTFALL;
        }
        if matches!(torque.branch, Branch::RightSaturated | Branch::LeftSaturated) {
            flag_bits |= flags::NEGATIVE_TORQUE;
        }

        let (alpha_f, alpha_r) = plant.wheel_sideslips(&state, &input);
        let mut record = TelemetryRecord {
            t,
            delta_f: input.delta_f,
            v_x: state.v_x,
            beta: state.beta,
            r: state.r,
            a_y,
            alpha_f,
            alpha_r,
            x1,
            x2_hat,
            m_z,
            t_rl: torque.t_rl,
            t_rr: torque.t_rr,
            slack,
            solver_iters: iters,
            flags: flag_bits,
        };

        let applied = torque.yaw_moment(&p);
        match plant.advance(&state, &input, applied, t_s, sc.substeps) {
            Ok(next) => {
                state = next;
                records.push(record);
                input_bounds.push(bound);
            }
            Err(e) => {
                record.flags |= flags::PLANT_FAULT;
                records.push(record);
                input_bounds.push(bound);
                fault = Some(e);
                break;
            }
        }
        observer.update(&model, m_z, &y_meas, t_s);
        u_prev = m_z;
    }

    let summary = RunSummary::from_records(&records, cfg, fault.is_some(), &input_bounds, &path_errors);
    Ok(RunResult {
        records,
        summary,
        input_bounds,
        path_errors,
        fault,
    })
}
