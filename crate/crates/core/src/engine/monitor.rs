use crate::semantics::{Action, BufferMode, GlobalState, OpKind, OpRef, SemanticsError};

/// Operations that complete when `action` takes `prev` to `next`.
///
/// An operation completes when it becomes matched; a buffered send completes
/// when it is issued.
pub fn completed_ops(prev: &GlobalState, action: &Action, next: &GlobalState) -> Vec<OpRef> {
    let mut out = Vec::new();
    for (rank, (p, n)) in prev.procs.iter().zip(&next.procs).enumerate() {
        for &i in &n.matched {
            if !p.is_matched(i) {
                out.push(OpRef::new(rank, i));
            }
        }
    }
    if let Action::Issue { rank, index } = *action {
        let buffered = next.buffer == BufferMode::Infinite
            && matches!(next.op(OpRef::new(rank, index)).kind, OpKind::Send { .. } | OpKind::ISend { .. });
        if buffered {
            out.push(OpRef::new(rank, index));
        }
    }
    out
}

/// Two-state automaton for `!first U second`, read as a weak until: a trace
/// where neither label completes satisfies it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monitor {
    first: String,
    second: String,
    seen_second: bool,
    violated: bool,
}

impl Monitor {
    pub fn new(first: &str, second: &str) -> Self {
        Monitor { first: first.to_string(), second: second.to_string(), seen_second: false, violated: false }
    }

    /// Feeds one transition; returns `false` once the property is violated.
    pub fn step(&mut self, prev: &GlobalState, action: &Action, next: &GlobalState) -> bool {
        if self.violated || self.seen_second {
            return !self.violated;
        }
        let done = completed_ops(prev, action, next);
        let has = |l: &str| done.iter().any(|&o| next.op(o).label.as_deref() == Some(l));
        if has(&self.second) {
            self.seen_second = true;
        } else if has(&self.first) {
            self.violated = true;
        }
        !self.violated
    }

    pub fn violated(&self) -> bool {
        self.violated
    }

    /// Whether no continuation can violate the property any more.
    pub fn settled(&self) -> bool {
        self.seen_second || self.violated
    }
}

/// Runs `trace` from `init`; `true` iff `first` never completes before `second`.
pub fn check_monitor(init: &GlobalState, trace: &[Action], first: &str, second: &str) -> Result<bool, SemanticsError> {
    let mut m = Monitor::new(first, second);
    let mut s = init.clone();
    for a in trace {
        let next = s.apply(a)?;
        if !m.step(&s, a, &next) {
            return Ok(false);
        }
        s = next;
    }
    Ok(true)
}
