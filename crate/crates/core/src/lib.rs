//! Point stabilization of a quadcopter.
//!
//! Two feedback designs are provided on top of a cascade (normal-form) model
//! of the vehicle:
//!
//! * [`controllers::Controller::A`]: static state feedback with a saturated PD
//!   altitude loop, a PD yaw loop and a backstepping-tuned horizontal loop;
//! * [`controllers::Controller::B`]: a dynamic extension (double integrators on
//!   the thrust and yaw channels) that linearizes the full 16-state model.
//!
//! [`gain_synthesis`] computes and certifies gains for both, and [`sim`] runs
//! deterministic fixed-step closed-loop simulations.

pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod gain_synthesis;
pub mod linalg;
pub mod normal_form;
pub mod sim;

pub use error::{Error, Result};
