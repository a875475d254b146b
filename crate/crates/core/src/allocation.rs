//! Daisy-chain split of the yaw moment onto the rear motors.
//!
//! Positive (propulsive) torque on the outer-to-be-pushed wheel is used first;
//! braking torque on the other side is only engaged once that wheel saturates.

use crate::params::VehicleParams;

/// Largest yaw moment one motor can produce with positive torque alone.
pub fn max_yaw_moment(t_max: f64, p: &VehicleParams) -> f64 {
    p.l_w / 2.0 * (t_max.max(0.0) / p.r_w)
}

/// Yaw moment produced by a rear torque pair.
pub fn yaw_moment(t_rl: f64, t_rr: f64, p: &VehicleParams) -> f64 {
    p.l_w / (2.0 * p.r_w) * (t_rr - t_rl)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Positive torque on the right wheel only.
    RightOnly,
    /// Positive torque on the left wheel only.
    LeftOnly,
    /// Right wheel saturated, left wheel braking.
    RightSaturated,
    /// Left wheel saturated, right wheel braking.
    LeftSaturated,
}

impl Branch {
    pub fn code(self) -> u8 {
        match self {
            Branch::RightOnly => 1,
            Branch::LeftOnly => 2,
            Branch::RightSaturated => 3,
            Branch::LeftSaturated => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueCommand {
    /// Rear-left motor torque [N m].
    pub t_rl: f64,
    /// Rear-right motor torque [N m].
    pub t_rr: f64,
    pub branch: Branch,
    /// Requested minus delivered yaw moment magnitude [N m]; zero unless the
    /// request exceeds what both motors can produce.
    pub shortfall: f64,
}

impl TorqueCommand {
    pub fn yaw_moment(&self, p: &VehicleParams) -> f64 {
        yaw_moment(self.t_rl, self.t_rr, p)
    }
}

/// Split `m_z` [N m] given the per-motor torque limit `t_max` [N m].
pub fn allocate(m_z: f64, t_max: f64, p: &VehicleParams) -> TorqueCommand {
    let t_max = t_max.max(0.0);
    let m_max = max_yaw_moment(t_max, p);
    let gain = 2.0 * p.r_w / p.l_w;
    let (t_rl, t_rr, branch) = if m_z.abs() <= m_max {
        if m_z >= 0.0 {
            (0.0, gain * m_z, Branch::RightOnly)
        } else {
            (-gain * m_z, 0.0, Branch::LeftOnly)
        }
    } else if m_z >= 0.0 {
        (-(gain * (m_z - m_max)).min(t_max), t_max, Branch::RightSaturated)
    } else {
        (t_max, -(gain * (-m_z - m_max)).min(t_max), Branch::LeftSaturated)
    };
    let delivered = yaw_moment(t_rl, t_rr, p);
    TorqueCommand {
        t_rl,
        t_rr,
        branch,
        shortfall: if m_z.abs() > 2.0 * m_max {
            m_z.abs() - delivered.abs()
        } else {
            0.0
        },
    }
}

/// How the controller input bound relates to the single-motor yaw moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputBoundMode {
    /// Both motors contribute: `2 * M_z^max`.
    #[default]
    TwoWheel,
    /// Positive torque on one wheel only: `M_z^max`.
    SingleWheel,
}

impl InputBoundMode {
    pub fn bound(self, t_max: f64, p: &VehicleParams) -> f64 {
        let m_max = max_yaw_moment(t_max, p);
        match self {
            InputBoundMode::TwoWheel => 2.0 * m_max,
            InputBoundMode::SingleWheel => m_max,
        }
    }
}
