//! Conventional comparison controller: a first-order sliding surface on the
//! sign-folded sideslip difference, `s = |x1| - zeta`, driven by `s' = -lambda s`.

use crate::error::{Error, Result};
use crate::params::VehicleParams;

/// Sign with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingConfig {
    /// Convergence rate [1/s].
    pub lambda: f64,
    /// Target gap [rad].
    pub zeta: f64,
}

impl Default for SlidingConfig {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            zeta: crate::mpc::MpcConfig::default().zeta,
        }
    }
}

impl SlidingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("baseline.lambda", self.lambda, "finite and > 0"));
        }
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(Error::invalid("baseline.zeta", self.zeta, "finite and >= 0"));
        }
        Ok(())
    }
}

pub fn sliding_surface(x1: f64, zeta: f64) -> f64 {
    sign(x1) * x1 - zeta
}

/// Inputs of one evaluation of the sliding law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingInputs {
    pub x1: f64,
    pub delta_f_dot: f64,
    /// Front and rear sideslip estimates [rad].
    pub alpha_f: f64,
    pub alpha_r: f64,
    pub v_x: f64,
}

/// Yaw moment from the sliding law before clamping.
pub fn control_law_unclamped(inp: &SlidingInputs, p: &VehicleParams, cfg: &SlidingConfig) -> f64 {
    let f_f = -p.c_f * inp.alpha_f;
    let f_r = -p.c_r * inp.alpha_r;
    let k = p.i_z * inp.v_x / p.wheelbase();
    let s = sliding_surface(inp.x1, cfg.zeta);
    -p.l_f * f_f + p.l_r * f_r + k * inp.delta_f_dot - sign(inp.x1) * k * cfg.lambda * s
}

/// Sliding law clamped to `[-u_bound, u_bound]`.
pub fn control_law(inp: &SlidingInputs, p: &VehicleParams, cfg: &SlidingConfig, u_bound: f64) -> f64 {
    control_law_unclamped(inp, p, cfg).clamp(-u_bound, u_bound)
}
