use std::fmt;

use thiserror::Error;

use crate::model::Mode;
use crate::trace::TraceRecord;

/// A parameter or configuration invariant violation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {}: {message}", .keys.join(", "))]
pub struct ValidationError {
    /// Keys involved, as they appear in scenario files.
    pub keys: Vec<String>,
    pub message: String,
}

impl ValidationError {
    pub fn new(keys: &[&str], message: impl Into<String>) -> Self {
        Self {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            message: message.into(),
        }
    }
}

/// Which jump a caller attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Upshift,
    Downshift,
    ImpactHs,
    ImpactHf,
    ConstraintActivate,
    ConstraintRelease,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Transition::Upshift => "upshift",
            Transition::Downshift => "downshift",
            Transition::ImpactHs => "impact_hs",
            Transition::ImpactHf => "impact_hf",
            Transition::ConstraintActivate => "constraint_activate",
            Transition::ConstraintRelease => "constraint_release",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{transition} is not permitted from {mode} mode")]
    InvalidTransition { transition: Transition, mode: Mode },
    #[error("operation requires {expected} mode, state is in {actual} mode")]
    WrongMode { expected: Mode, actual: Mode },
    #[error("high-force state must have w_1 = 0, got {w_1}")]
    HfInvariant { w_1: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("controller phase {phase} is inconsistent with actuator mode {mode}")]
    InternalFault { phase: &'static str, mode: Mode },
    #[error("non-finite measurement")]
    NonFiniteMeasurement,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation diverged at t = {time}")]
    Diverged {
        time: f64,
        /// Last record written before the failing step.
        last: Option<TraceRecord>,
    },
    #[error("at t = {time}: {source}")]
    Model { time: f64, source: ModelError },
    #[error("at t = {time}: {source}")]
    Controller { time: f64, source: ControllerError },
    #[error(transparent)]
    Config(#[from] ValidationError),
}

/// Scenario text could not be read.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate key `{key}` (first defined on line {first_line})")]
    DuplicateKey {
        line: usize,
        key: String,
        first_line: usize,
    },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("missing required key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("[{section}] {key}: {message}")]
    BadValue {
        section: String,
        key: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}
