//! Symbolic verification loop: blocking-driven execution, wildcard forking,
//! per-path model checking and pruning of subsumed worklist states.

mod monitor;
mod replay;
mod verify;

pub use monitor::{check_monitor, completed_ops, Monitor};
pub use replay::{find_witness, replay, PropertyRef, ReplayCase, ReplayError, WildcardMatch};
pub use verify::{prune, verify, WorkItem};

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::ConstraintError;
use crate::csp::CspError;
use crate::semantics::{BufferMode, SemanticsError};

pub const DEFAULT_MAX_PATHS: usize = 10_000;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineOptions {
    /// Match only the reduced action set at each global block.
    pub por: bool,
    /// Model-check each completed path and drop worklist states it subsumes.
    pub prune: bool,
    pub buffer: BufferMode,
    pub max_paths: usize,
    pub timeout: Duration,
    /// Keep a textual dump of every generated model.
    pub dump_models: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            por: true,
            prune: true,
            buffer: BufferMode::Infinite,
            max_paths: DEFAULT_MAX_PATHS,
            timeout: DEFAULT_TIMEOUT,
            dump_models: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ViolationFound,
    PropertyHolds,
    /// The search finished but some question could not be decided.
    Exhausted,
    BudgetExceeded,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ViolationFound => "violation_found",
            Verdict::PropertyHolds => "property_holds",
            Verdict::Exhausted => "exhausted",
            Verdict::BudgetExceeded => "budget_exceeded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Deadlock,
    /// A `before` property's first label completed too early.
    Order,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Deadlock => "deadlock",
            ViolationKind::Order => "order",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub paths_explored: usize,
    pub states_pruned: usize,
    pub model_checker_calls: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub verdict: Verdict,
    /// Present iff the verdict is `ViolationFound`.
    pub counterexample: Option<ReplayCase>,
    pub stats: Stats,
    /// Why the verdict is `Exhausted` or `BudgetExceeded`.
    pub note: Option<String>,
    /// Model dumps in generation order, when requested.
    pub models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}
