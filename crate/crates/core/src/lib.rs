//! Planar bipedal jumping stack: adaptive-model trajectory optimization,
//! adaptive-frequency MPC tracking, and a contact-physics simulator.
//!
//! The crate is organized around the jumping pipeline:
//!
//! - [`model`] — robot parameters and shared planar state types.
//! - [`dynamics`] — stance pendulum, flight and landing trunk models,
//!   kinematics and Jacobians.
//! - [`nlp`] — sparse nonlinear program container and interior-point solver.
//! - [`planner`] — phase-based transcription of the jump, solve, audit, and
//!   jump chaining.
//! - [`mpc`] — variable-step SRBD tracker with a condensed QP backend.
//! - [`sim`] — floating-base plant with penalty contact, closed-loop runs,
//!   and randomized campaigns.

pub mod dynamics;
pub mod nlp;
pub mod math;
pub mod model;

pub use model::{GroundWrench, PendulumState, RobotModel, TrunkState};
