//! Deterministic simulation and verification workbench for subsystem-based
//! adaptive impedance control of a 7-DoF exoskeleton arm interacting with a
//! simulated human arm and a virtual wall.
//!
//! The crate is organized around the closed loop:
//!
//! * [`spatial`] — frame-tagged 6D vector/transform arithmetic.
//! * [`model`] — kinematics, regressors, and plant dynamics of the chain.
//! * [`nal`] — natural adaptation law on the SPD image of inertial params.
//! * [`controller`] — the per-tick control pipeline (impedance design
//!   variable, task-to-joint mapping, velocity/force recursions, torque law).
//! * [`interaction`] — human arm coupling, virtual wall, contact energy.
//! * [`sim`] — fixed-step scenario execution and structured logging.
//! * [`diagnostics`] — virtual power flows, accompanying function, and the
//!   telescoping cancellation checks.
//! * [`experiments`] — Z-width sweeps, tracking presets, verification suite.

pub mod config;
pub mod controller;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod interaction;
pub mod model;
pub mod nal;
pub mod sim;
pub mod spatial;

pub use error::{Result, VdcError};
