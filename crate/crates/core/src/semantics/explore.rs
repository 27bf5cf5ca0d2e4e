use std::collections::{BTreeSet, HashSet};

use super::{GlobalState, OpRef, SemanticsError};

pub const DEFAULT_EXPLORE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploreMode {
    /// Follow every enabled action.
    Full,
    /// Follow only the reduced set.
    Por,
}

/// Summary of an exhaustive exploration from one state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exploration {
    /// Reachable states with no enabled action and a blocked process.
    pub deadlocks: BTreeSet<GlobalState>,
    /// Matched-pair sets of reachable states with no enabled action and no blocked process.
    pub terminals: BTreeSet<BTreeSet<(OpRef, OpRef)>>,
    /// Every `(send, recv)` pair matched somewhere in the explored space.
    pub pairs: BTreeSet<(OpRef, OpRef)>,
    pub states: usize,
}

/// Depth-first exploration with a visited set. Inputs must be concrete.
pub fn explore(init: &GlobalState, mode: ExploreMode, budget: usize) -> Result<Exploration, SemanticsError> {
    let mut out = Exploration::default();
    let mut seen: HashSet<GlobalState> = HashSet::new();
    let mut stack = vec![init.clone()];
    while let Some(s) = stack.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        if seen.len() > budget {
            return Err(SemanticsError::Budget(budget));
        }
        if let Some((rank, _)) = s.pending_branch()? {
            return Err(SemanticsError::SymbolicBranch { rank });
        }
        out.pairs.extend(s.matches.iter().copied());
        let actions = match mode {
            ExploreMode::Full => s.enabled(),
            ExploreMode::Por => s.por_subset(),
        };
        if actions.is_empty() {
            if s.any_blocked() {
                out.deadlocks.insert(s);
            } else {
                out.terminals.insert(s.matches.clone());
            }
            continue;
        }
        for a in actions.iter().rev() {
            stack.push(s.apply(a)?);
        }
    }
    out.states = seen.len();
    Ok(out)
}
