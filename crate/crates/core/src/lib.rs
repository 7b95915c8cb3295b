//! Hybrid model, impact maps and shift controller for a dual-speed
//! dual-motor (DSDM) actuator.
//!
//! Two motors drive one output through a differential. With the brake on M1
//! open the actuator runs through the low reduction R1 (high-speed mode);
//! with it closed only M2 drives, through the high reduction R2 (high-force
//! mode). The crate provides:
//!
//! - [`model`]: continuous dynamics of both modes, shift and impact jump
//!   maps, nullspace projection.
//! - [`environment`]: loads, contact crossing and inelastic impact impulses.
//! - [`controller`]: torque routing, nullspace speed loops and the shift
//!   state machine.
//! - [`simulator`]: event-located RK4 integration of the closed loop.
//! - [`scenario`]: the INI-style scenario and parameter file format.
//! - [`verify`]: randomized property checks against independent oracles.

// Range checks are written `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod environment;
pub mod error;
pub mod metrics;
pub mod model;
pub mod params;
pub mod scenario;
pub mod simulator;
pub mod trace;
pub mod verify;

pub use controller::{
    BrakeCommand, ControllerCommand, ControllerConfig, ControllerGains, ControllerState, Phase,
    ScheduleEntry, Trigger,
};
pub use environment::{ContactEvent, ContactKind, LoadModel};
pub use error::{ControllerError, ModelError, ParseError, SimError, Transition, ValidationError};
pub use metrics::Metrics;
pub use model::{HybridState, Mode, Rates, TorqueInput};
pub use params::{ActuatorParams, FittedInertias};
pub use scenario::ScenarioSpec;
pub use simulator::{run_scenario, SimConfig, SimOutput};
pub use trace::TraceRecord;
