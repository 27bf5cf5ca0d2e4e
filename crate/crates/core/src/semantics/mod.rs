//! Operational semantics of the language as communicating state machines.
//!
//! A [`GlobalState`] holds one [`ProcState`] per rank. Processes run local
//! statements eagerly and stop at communication statements; the transition
//! rules ([`Action`]) issue operations and match them.

mod explore;
mod rules;
mod state;

pub use explore::{explore, ExploreMode, Exploration, DEFAULT_EXPLORE_BUDGET};
pub use rules::{cond_cb, is_blocking, match_static, ready};
pub use state::{Flag, Frame, GlobalState, ProcState, LOCAL_STEP_LIMIT};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Send-buffer model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferMode {
    /// Standard sends complete at issue.
    #[default]
    Infinite,
    /// Standard sends behave like synchronous sends.
    Zero,
}

impl std::str::FromStr for BufferMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "infinite" => Ok(BufferMode::Infinite),
            "zero" => Ok(BufferMode::Zero),
            other => Err(format!("unknown buffer mode `{other}`")),
        }
    }
}

impl fmt::Display for BufferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BufferMode::Infinite => "infinite",
            BufferMode::Zero => "zero",
        })
    }
}

/// An issued operation: `(rank, position in that rank's issue log)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpRef {
    pub rank: usize,
    pub index: usize,
}

impl OpRef {
    pub fn new(rank: usize, index: usize) -> Self {
        OpRef { rank, index }
    }
}

impl fmt::Display for OpRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}#{}", self.rank, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Rank(usize),
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Ssend { dst: usize },
    Send { dst: usize },
    ISend { dst: usize, req: String },
    Recv { src: Source },
    IRecv { src: Source, req: String },
    Barrier,
    /// `target` is the issue index of the nonblocking operation the request names.
    Wait { req: String, target: usize },
}

impl OpKind {
    pub fn is_send(&self) -> bool {
        matches!(self, OpKind::Ssend { .. } | OpKind::Send { .. } | OpKind::ISend { .. })
    }

    pub fn is_recv(&self) -> bool {
        matches!(self, OpKind::Recv { .. } | OpKind::IRecv { .. })
    }

    pub fn dst(&self) -> Option<usize> {
        match self {
            OpKind::Ssend { dst } | OpKind::Send { dst } | OpKind::ISend { dst, .. } => Some(*dst),
            _ => None,
        }
    }

    pub fn src(&self) -> Option<Source> {
        match self {
            OpKind::Recv { src } | OpKind::IRecv { src, .. } => Some(*src),
            _ => None,
        }
    }

    pub fn is_wildcard(&self) -> bool {
        self.src() == Some(Source::Any)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = |s: &Source| match s {
            Source::Rank(r) => r.to_string(),
            Source::Any => "*".to_string(),
        };
        match self {
            OpKind::Ssend { dst } => write!(f, "ssend({dst})"),
            OpKind::Send { dst } => write!(f, "send({dst})"),
            OpKind::ISend { dst, req } => write!(f, "isend({dst}, {req})"),
            OpKind::Recv { src: s } => write!(f, "recv({})", src(s)),
            OpKind::IRecv { src: s, req } => write!(f, "irecv({}, {req})", src(s)),
            OpKind::Barrier => f.write_str("barrier"),
            OpKind::Wait { req, .. } => write!(f, "wait({req})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Operation {
    pub kind: OpKind,
    pub label: Option<String>,
}

/// Transition labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Issue the next communication statement of `rank`; it becomes `seq[index]`.
    Issue { rank: usize, index: usize },
    Barrier,
    Wait { op: OpRef },
    Sr { send: OpRef, recv: OpRef },
    SrStar { send: OpRef, recv: OpRef },
}

impl Action {
    /// The rank used to order deterministic matchings in the reduced set.
    pub fn acting_rank(&self) -> Option<usize> {
        match self {
            Action::Issue { rank, .. } => Some(*rank),
            Action::Wait { op } => Some(op.rank),
            Action::Sr { send, .. } | Action::SrStar { send, .. } => Some(send.rank),
            Action::Barrier => None,
        }
    }

    pub fn pair(&self) -> Option<(OpRef, OpRef)> {
        match self {
            Action::Sr { send, recv } | Action::SrStar { send, recv } => Some((*send, *recv)),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Issue { rank, index } => write!(f, "issue(P{rank}#{index})"),
            Action::Barrier => f.write_str("B"),
            Action::Wait { op } => write!(f, "W({op})"),
            Action::Sr { send, recv } => write!(f, "SR({send}, {recv})"),
            Action::SrStar { send, recv } => write!(f, "SR*({send}, {recv})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("action {0} is not enabled")]
    NotEnabled(Action),
    #[error("process {rank}: unbound variable `{name}`")]
    UnboundVariable { rank: usize, name: String },
    #[error("process {rank}: communication peer `{expr}` is not concrete")]
    SymbolicRank { rank: usize, expr: String },
    #[error("process {rank}: peer rank {value} out of range")]
    RankOutOfRange { rank: usize, value: i64 },
    #[error("process {rank}: wait on request `{req}` that names no issued operation")]
    UnknownRequest { rank: usize, req: String },
    #[error("process {rank}: exceeded {LOCAL_STEP_LIMIT} local steps without communicating")]
    LocalStepLimit { rank: usize },
    #[error("process {rank}: branch condition depends on symbolic inputs")]
    SymbolicBranch { rank: usize },
    #[error("exploration exceeded {0} states")]
    Budget(usize),
}
