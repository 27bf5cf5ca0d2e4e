//! A small CSP dialect, path-to-model generation and an explicit-state checker.
//!
//! Each issued send owns a channel of capacity 0 (synchronous) or 1 (buffered).
//! Receives become an external choice over reads of the channels that may feed
//! them; ordering constraints are expressed as guards on channel state.

mod build;
mod check;
mod render;

pub use build::{generate_csp, ideal_model, smo, SmoMode};
pub use check::{
    check_before, check_deadlock, failures, failures_equivalent, CheckOutcome, Config, Label, Transition,
    DEFAULT_CHECK_BUDGET,
};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::semantics::OpRef;

pub type EventId = u32;
pub type ChanId = u32;

/// A precondition on channel state attached to a read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    /// The channel's message has been read.
    Consumed(ChanId),
    /// The channel has been written (its message may or may not have been read).
    Written(ChanId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Skip,
    /// Successfully terminated.
    Omega,
    /// Performs the event, then behaves as `Skip`.
    Event(EventId),
    Seq(Arc<Term>, Arc<Term>),
    /// External choice; the empty choice is `STOP`.
    Choice(Vec<Arc<Term>>),
    /// Parallel composition synchronizing on the given events.
    Par(Arc<Term>, Arc<Term>, Arc<BTreeSet<EventId>>),
    Read { chan: ChanId, event: EventId, guards: Arc<[Guard]>, then: Arc<Term> },
    Write { chan: ChanId, event: EventId, then: Arc<Term> },
}

impl Term {
    pub fn skip() -> Arc<Term> {
        Arc::new(Term::Skip)
    }

    pub fn event(e: EventId) -> Arc<Term> {
        Arc::new(Term::Event(e))
    }

    pub fn seq(a: Arc<Term>, b: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Seq(a, b))
    }

    pub fn par(a: Arc<Term>, b: Arc<Term>, sync: BTreeSet<EventId>) -> Arc<Term> {
        Arc::new(Term::Par(a, b, Arc::new(sync)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub name: String,
    /// 0 or 1.
    pub capacity: u8,
    /// Hidden channels carry ordering tokens; their actions are internal.
    pub hidden: bool,
    /// The send operation that owns the channel.
    pub origin: Option<OpRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventMeta {
    pub name: String,
    /// Operations completed when the event occurs.
    pub ops: Vec<OpRef>,
    /// `(send, recv)` when the event is a message read.
    pub pair: Option<(OpRef, OpRef)>,
    /// Actions on ordering-token channels are internal.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspModel {
    pub root: Arc<Term>,
    pub channels: Vec<Channel>,
    pub events: Vec<EventMeta>,
    /// Event label to the operations carrying it.
    pub labels: BTreeMap<String, Vec<OpRef>>,
}

impl CspModel {
    pub fn event_name(&self, e: EventId) -> &str {
        &self.events[e as usize].name
    }

    pub fn event_by_name(&self, name: &str) -> Option<EventId> {
        self.events.iter().position(|m| m.name == name).map(|i| i as EventId)
    }

    /// Channels owned by send operations (ordering-token channels excluded).
    pub fn message_channels(&self) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(|c| !c.hidden)
    }

    /// Matched pairs recorded by a trace of events.
    pub fn pairs_of(&self, trace: &[EventId]) -> BTreeSet<(OpRef, OpRef)> {
        trace.iter().filter_map(|&e| self.events[e as usize].pair).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CspError {
    #[error("state space exceeds {0} configurations")]
    Budget(usize),
    #[error("label `{0}` does not map to any modeled event")]
    LabelUnmapped(String),
    #[error("ideal model: {0}")]
    Ideal(#[from] crate::semantics::SemanticsError),
}
