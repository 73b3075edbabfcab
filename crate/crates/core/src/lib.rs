//! Pursuit-evasion simulation for unicycle agents with bounded speed and turn
//! rate: single-pair alert-turn controllers, multi-agent group escape and
//! target switching, a fixed-step engine, parameter studies and closed-form
//! checks.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod analysis;
pub mod engine;
pub mod error;
pub mod io;
pub mod math;
pub mod multi;
pub mod single;
pub mod verify;

pub use agents::{AgentParams, AgentState, ControlCommand, Phase, PhaseState, Role};
pub use engine::{min_distance, run, run_summary, Scenario, SimTrace};
pub use error::{Error, Result};
pub use math::{MathConfig, Position};
