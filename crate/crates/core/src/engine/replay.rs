use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::monitor::Monitor;
use super::ViolationKind;
use crate::constraint::Assignment;
use crate::lang::{Program, PropertySpec};
use crate::semantics::{Action, BufferMode, GlobalState, OpRef, SemanticsError};

/// A wildcard receive and the send it took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WildcardMatch {
    pub recv: OpRef,
    pub send: OpRef,
}

/// Everything needed to reproduce a violation deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayCase {
    pub inputs: Assignment,
    pub buffer: BufferMode,
    pub violation: ViolationKind,
    pub property: PropertyRef,
    pub interleaving: Vec<Action>,
    pub wildcard_matchings: Vec<WildcardMatch>,
}

/// Serializable form of the checked property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropertyRef {
    DeadlockFree,
    Before { first: String, second: String },
}

impl From<&PropertySpec> for PropertyRef {
    fn from(p: &PropertySpec) -> Self {
        match p {
            PropertySpec::DeadlockFree => PropertyRef::DeadlockFree,
            PropertySpec::Before { first, second } => {
                PropertyRef::Before { first: first.clone(), second: second.clone() }
            }
        }
    }
}

impl ReplayCase {
    pub fn new(
        inputs: Assignment,
        buffer: BufferMode,
        violation: ViolationKind,
        property: PropertyRef,
        interleaving: Vec<Action>,
    ) -> Self {
        let wildcard_matchings = interleaving
            .iter()
            .filter_map(|a| match *a {
                Action::SrStar { send, recv } => Some(WildcardMatch { recv, send }),
                _ => None,
            })
            .collect();
        ReplayCase { inputs, buffer, violation, property, interleaving, wildcard_matchings }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("step {step}: {reason}")]
    Diverged { step: usize, reason: String },
    #[error("replay ends without exhibiting a {0}")]
    NotReproduced(ViolationKind),
    #[error("replay case for a `{0}` violation lacks a `before` property")]
    MissingProperty(ViolationKind),
}

/// Re-executes `case` on `program` and returns the violating state.
pub fn replay(program: &Program, case: &ReplayCase) -> Result<GlobalState, ReplayError> {
    let mut s = GlobalState::concrete(program, case.buffer, &case.inputs)?;
    let mut monitor = match (&case.property, case.violation) {
        (PropertyRef::Before { first, second }, _) => Some(Monitor::new(first, second)),
        (PropertyRef::DeadlockFree, ViolationKind::Order) => {
            return Err(ReplayError::MissingProperty(ViolationKind::Order))
        }
        (PropertyRef::DeadlockFree, ViolationKind::Deadlock) => None,
    };
    let mut wild = Vec::new();
    for (step, a) in case.interleaving.iter().enumerate() {
        if !s.is_enabled(a) {
            return Err(ReplayError::Diverged { step, reason: format!("{a} is not enabled") });
        }
        let next = s.apply(a)?;
        if let Some(m) = monitor.as_mut() {
            m.step(&s, a, &next);
        }
        if let Action::SrStar { send, recv } = *a {
            wild.push(WildcardMatch { recv, send });
        }
        s = next;
    }
    if wild != case.wildcard_matchings {
        return Err(ReplayError::Diverged {
            step: case.interleaving.len(),
            reason: "wildcard matchings disagree with the interleaving".into(),
        });
    }
    let exhibited = match case.violation {
        ViolationKind::Deadlock => s.enabled().is_empty() && s.any_blocked(),
        ViolationKind::Order => monitor.is_some_and(|m| m.violated()),
    };
    if exhibited {
        Ok(s)
    } else {
        Err(ReplayError::NotReproduced(case.violation))
    }
}

/// Searches the concrete program for an interleaving exhibiting `kind`.
///
/// Matchings in `prefer` (typically those of a model counterexample) are tried
/// exclusively first; if that finds nothing, every matching is allowed.
pub fn find_witness(
    program: &Program,
    inputs: &Assignment,
    buffer: BufferMode,
    kind: ViolationKind,
    property: &PropertySpec,
    prefer: &BTreeSet<(OpRef, OpRef)>,
    budget: usize,
) -> Result<Option<ReplayCase>, ReplayError> {
    let init = GlobalState::concrete(program, buffer, inputs)?;
    let monitor = match property {
        PropertySpec::Before { first, second } => Some(Monitor::new(first, second)),
        PropertySpec::DeadlockFree => None,
    };
    if kind == ViolationKind::Order && monitor.is_none() {
        return Err(ReplayError::MissingProperty(kind));
    }
    for restricted in [true, false] {
        let allow = |a: &Action| !restricted || a.pair().map_or(true, |p| prefer.contains(&p));
        if let Some(trace) = search(&init, kind, monitor.clone(), &allow, budget)? {
            let case = ReplayCase::new(inputs.clone(), buffer, kind, property.into(), trace);
            return Ok(Some(case));
        }
    }
    Ok(None)
}

fn search(
    init: &GlobalState,
    kind: ViolationKind,
    monitor: Option<Monitor>,
    allow: &dyn Fn(&Action) -> bool,
    budget: usize,
) -> Result<Option<Vec<Action>>, ReplayError> {
    let mut seen: HashSet<(GlobalState, Option<Monitor>)> = HashSet::new();
    let mut stack = vec![(init.clone(), monitor, Vec::new())];
    while let Some((s, m, trace)) = stack.pop() {
        if !seen.insert((s.clone(), m.clone())) || seen.len() > budget {
            continue;
        }
        let enabled = s.enabled();
        if kind == ViolationKind::Deadlock && enabled.is_empty() && s.any_blocked() {
            return Ok(Some(trace));
        }
        if m.as_ref().is_some_and(|m| m.settled()) && kind == ViolationKind::Order {
            continue;
        }
        for a in enabled.iter().rev().filter(|a| allow(a)) {
            let next = s.apply(a)?;
            let mut m2 = m.clone();
            if let Some(mon) = m2.as_mut() {
                mon.step(&s, a, &next);
            }
            let mut t = trace.clone();
            t.push(*a);
            if kind == ViolationKind::Order && m2.as_ref().is_some_and(|m| m.violated()) {
                return Ok(Some(t));
            }
            stack.push((next, m2, t));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    const FIG2: &str = "
        sym x : int in [0, 255];
        proc 0 { send(1) @send_p0; }
        proc 1 { if (x != 97) { recv(0); } else { irecv(*, req); } recv(3); }
        proc 2 { send(1) @send_p2; }
        proc 3 { send(1); }
    ";

    #[test]
    fn deadlock_witness_round_trips() {
        let p = parse_program(FIG2).unwrap();
        let inputs: Assignment = [("x".to_string(), 97)].into();
        let case = find_witness(
            &p,
            &inputs,
            BufferMode::Infinite,
            ViolationKind::Deadlock,
            &PropertySpec::DeadlockFree,
            &BTreeSet::new(),
            100_000,
        )
        .unwrap()
        .expect("deadlock reachable");
        assert_eq!(case.wildcard_matchings, vec![WildcardMatch { recv: OpRef::new(1, 0), send: OpRef::new(3, 0) }]);
        let json = serde_json::to_string(&case).unwrap();
        let back: ReplayCase = serde_json::from_str(&json).unwrap();
        assert_eq!(back, case);
        let s = replay(&p, &back).unwrap();
        assert!(s.any_blocked());
    }

    #[test]
    fn no_deadlock_on_other_branch() {
        let p = parse_program(FIG2).unwrap();
        let inputs: Assignment = [("x".to_string(), 3)].into();
        let found = find_witness(
            &p,
            &inputs,
            BufferMode::Infinite,
            ViolationKind::Deadlock,
            &PropertySpec::DeadlockFree,
            &BTreeSet::new(),
            100_000,
        )
        .unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn order_witness_replays() {
        let p = parse_program(FIG2).unwrap();
        let prop = PropertySpec::Before { first: "send_p2".into(), second: "send_p0".into() };
        let case = find_witness(
            &p,
            &Assignment::from([("x".to_string(), 3)]),
            BufferMode::Infinite,
            ViolationKind::Order,
            &prop,
            &BTreeSet::new(),
            100_000,
        )
        .unwrap()
        .expect("P2 can send first");
        replay(&p, &case).unwrap();
    }

    #[test]
    fn tampered_case_is_rejected() {
        let p = parse_program(FIG2).unwrap();
        let mut case = ReplayCase::new(
            Assignment::from([("x".to_string(), 3)]),
            BufferMode::Infinite,
            ViolationKind::Deadlock,
            PropertyRef::DeadlockFree,
            vec![Action::Issue { rank: 0, index: 0 }],
        );
        assert!(matches!(replay(&p, &case), Err(ReplayError::NotReproduced(_))));
        case.interleaving = vec![Action::Barrier];
        assert!(matches!(replay(&p, &case), Err(ReplayError::Diverged { step: 0, .. })));
    }
}
