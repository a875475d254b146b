//! Cornering control on the front/rear wheel sideslip difference.
//!
//! The crate contains a nonlinear bicycle plant with saturating tires, the
//! linear control model in sideslip-difference coordinates, a Luenberger
//! observer, a condensed constrained MPC with its own small QP solver, the
//! daisy-chain torque allocation, a sliding-surface comparison controller and
//! a closed-loop scenario harness.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod baseline;
pub mod ctrl_model;
pub mod error;
pub mod harness;
pub mod mpc;
pub mod observer;
pub mod params;
pub mod plant;

pub use error::{Error, Result};
pub use params::{MotorTorqueCurve, VehicleParams};
