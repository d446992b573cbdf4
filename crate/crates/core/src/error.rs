//! Error types shared across the crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single violated invariant, reported with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub(crate) fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset `{0}` (expected `tx2` or `xavier`)")]
    UnknownPreset(String),
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("override {axis}={value} rejected:\n{}", format_violations(violations))]
    OverrideRejected {
        axis: String,
        value: u64,
        violations: Vec<Violation>,
    },
    #[error("negative area weight `{0}`")]
    NegativeWeight(String),
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in `{path}`: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid kernel:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("regranularize rejected: {0}")]
    Regranularize(String),
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in `{path}`: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration:\n{}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("invalid kernel:\n{}", format_violations(.0))]
    InvalidKernel(Vec<Violation>),
    #[error("kernel unschedulable: {binding} limit allows zero blocks per SM")]
    Unschedulable { binding: String },
    #[error("simulation aborted: cycle cap of {cap} exceeded")]
    CycleCapExceeded { cap: u64 },
    #[error("results come from different kernels")]
    KernelMismatch,
}

#[derive(Debug, Error)]
pub enum DseError {
    #[error("invalid sweep plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("no single-axis sweep data for `{axis}` (need at least 3 points, found {found})")]
    MissingSweep { axis: String, found: usize },
    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in `{path}`: {message}")]
    Parse { path: String, message: String },
}
