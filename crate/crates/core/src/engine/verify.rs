use std::time::Instant;

use super::monitor::Monitor;
use super::replay::{find_witness, ReplayCase, ReplayError};
use super::{EngineError, EngineOptions, Stats, Verdict, VerificationResult, ViolationKind};
use crate::constraint::{ConstraintError, PathCondition, Solver};
use crate::csp::{check_before, check_deadlock, generate_csp, CheckOutcome, CspError, SmoMode, DEFAULT_CHECK_BUDGET};
use crate::lang::{Expr, Program, PropertySpec};
use crate::semantics::{Action, GlobalState, DEFAULT_EXPLORE_BUDGET};

/// A pending state with the actions that led to it.
#[derive(Debug, Clone)]
pub struct WorkItem {
    pub state: GlobalState,
    pub trace: Vec<Action>,
    monitor: Option<Monitor>,
}

impl WorkItem {
    pub fn new(state: GlobalState, prop: &PropertySpec) -> Self {
        let monitor = match prop {
            PropertySpec::Before { first, second } => Some(Monitor::new(first, second)),
            PropertySpec::DeadlockFree => None,
        };
        WorkItem { state, trace: Vec::new(), monitor }
    }

    fn apply(&self, a: &Action) -> Result<WorkItem, EngineError> {
        let next = self.state.apply(a)?;
        let mut monitor = self.monitor.clone();
        if let Some(m) = monitor.as_mut() {
            m.step(&self.state, a, &next);
        }
        let mut trace = self.trace.clone();
        trace.push(*a);
        Ok(WorkItem { state: next, trace, monitor })
    }
}

/// Removes the items whose path condition implies `current`; returns how many.
///
/// Items whose implication cannot be decided are kept.
pub fn prune(worklist: &mut Vec<WorkItem>, current: &PathCondition, solver: &Solver) -> usize {
    let before = worklist.len();
    worklist.retain(|w| !matches!(solver.implies(&w.state.path_condition(), current), Ok(true)));
    before - worklist.len()
}

enum PathEnd {
    Terminal(WorkItem),
    Infeasible,
}

struct Run<'a> {
    program: &'a Program,
    prop: &'a PropertySpec,
    opts: &'a EngineOptions,
    solver: Solver,
    work: Vec<WorkItem>,
    stats: Stats,
    undecided: Option<String>,
    models: Vec<String>,
}

/// Verifies `prop` over every input and interleaving of `program`.
pub fn verify(program: &Program, prop: &PropertySpec, opts: &EngineOptions) -> Result<VerificationResult, EngineError> {
    let start = Instant::now();
    let init = WorkItem::new(GlobalState::initial(program, opts.buffer)?, prop);
    let mut run = Run {
        program,
        prop,
        opts,
        solver: Solver::new(program.domains()),
        work: vec![init],
        stats: Stats::default(),
        undecided: None,
        models: Vec::new(),
    };
    let outcome = run.main_loop(start);
    run.stats.wall_time = start.elapsed();
    let (verdict, counterexample, note) = outcome?;
    Ok(VerificationResult { verdict, counterexample, stats: run.stats, note, models: run.models })
}

type Outcome = (Verdict, Option<ReplayCase>, Option<String>);

impl Run<'_> {
    fn main_loop(&mut self, start: Instant) -> Result<Outcome, EngineError> {
        while let Some(item) = self.work.pop() {
            if self.stats.paths_explored >= self.opts.max_paths {
                return Ok(budget(format!("path budget of {} exhausted", self.opts.max_paths)));
            }
            if start.elapsed() > self.opts.timeout {
                return Ok(budget(format!("timeout of {:?} exceeded", self.opts.timeout)));
            }
            let PathEnd::Terminal(done) = self.run_path(item)? else { continue };
            self.stats.paths_explored += 1;
            if let Some(outcome) = self.check_path(done)? {
                return Ok(outcome);
            }
        }
        Ok(match self.undecided.take() {
            Some(why) => (Verdict::Exhausted, None, Some(why)),
            None => (Verdict::PropertyHolds, None, None),
        })
    }

    fn is_sat(&mut self, pc: &PathCondition) -> Result<bool, EngineError> {
        match self.solver.is_sat(pc) {
            Ok(b) => Ok(b),
            Err(e @ ConstraintError::TooLarge { .. }) => {
                self.undecided.get_or_insert_with(|| format!("branch kept undecided: {e}"));
                Ok(true)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Executes one path to a state with nothing enabled, forking at symbolic
    /// branches and wildcard matchings. Siblings go on the worklist.
    fn run_path(&mut self, mut item: WorkItem) -> Result<PathEnd, EngineError> {
        loop {
            if let Some((rank, cond)) = item.state.pending_branch()? {
                let pc = item.state.path_condition();
                let neg = Expr::not(cond.clone());
                let on_true = self.is_sat(&pc.with(cond.clone()))?;
                let on_false = self.is_sat(&pc.with(neg.clone()))?;
                let taken = match (on_true, on_false) {
                    (true, true) => {
                        let other = item.state.resolve_branch(rank, false, Some(neg))?;
                        self.work.push(WorkItem { state: other, ..item.clone() });
                        item.state.resolve_branch(rank, true, Some(cond))?
                    }
                    (true, false) => item.state.resolve_branch(rank, true, None)?,
                    (false, true) => item.state.resolve_branch(rank, false, None)?,
                    (false, false) => return Ok(PathEnd::Infeasible),
                };
                item.state = taken;
                continue;
            }
            let actions = self.choices(&item.state);
            let Some((first, rest)) = actions.split_first() else {
                return Ok(PathEnd::Terminal(item));
            };
            for a in rest.iter().rev() {
                let sibling = item.apply(a)?;
                self.work.push(sibling);
            }
            item = item.apply(first)?;
        }
    }

    /// Issues run one at a time, lowest rank first; at a global block the
    /// reduced set (or every enabled matching without reduction) is forked.
    fn choices(&self, s: &GlobalState) -> Vec<Action> {
        if self.opts.por {
            return s.por_subset();
        }
        let en = s.enabled();
        match en.iter().find(|a| matches!(a, Action::Issue { .. })) {
            Some(a) => vec![*a],
            None => en,
        }
    }

    fn check_path(&mut self, done: WorkItem) -> Result<Option<Outcome>, EngineError> {
        let pc = done.state.path_condition();
        if done.state.any_blocked() {
            let case = self.case_from_trace(&pc, ViolationKind::Deadlock, done.trace)?;
            return Ok(Some((Verdict::ViolationFound, Some(case), None)));
        }
        if !self.opts.prune {
            if done.monitor.as_ref().is_some_and(|m| m.violated()) {
                let case = self.case_from_trace(&pc, ViolationKind::Order, done.trace)?;
                return Ok(Some((Verdict::ViolationFound, Some(case), None)));
            }
            return Ok(None);
        }

        let model = generate_csp(&done.state, SmoMode::Optimized);
        self.stats.model_checker_calls += 1;
        if self.opts.dump_models {
            self.models.push(model.dump());
        }
        let mut outcome = (ViolationKind::Deadlock, check_deadlock(&model, DEFAULT_CHECK_BUDGET));
        if let (Ok(CheckOutcome::Holds { .. }), PropertySpec::Before { first, second }) = (&outcome.1, self.prop) {
            outcome = (ViolationKind::Order, check_before(&model, first, second, DEFAULT_CHECK_BUDGET, false));
        }
        match outcome {
            (_, Err(CspError::Budget(n))) => Ok(Some(budget(format!("model checker exceeded {n} configurations")))),
            (_, Err(e)) => Err(e.into()),
            (_, Ok(CheckOutcome::Holds { .. })) => {
                self.stats.states_pruned += prune(&mut self.work, &pc, &self.solver);
                Ok(None)
            }
            (kind, Ok(CheckOutcome::Violation { trace, .. })) => {
                let inputs = self.inputs_for(&pc)?;
                let prefer = model.pairs_of(&trace);
                let case = find_witness(
                    self.program,
                    &inputs,
                    self.opts.buffer,
                    kind,
                    self.prop,
                    &prefer,
                    DEFAULT_EXPLORE_BUDGET,
                )?
                .ok_or(ReplayError::NotReproduced(kind))?;
                Ok(Some((Verdict::ViolationFound, Some(case), None)))
            }
        }
    }

    fn inputs_for(&self, pc: &PathCondition) -> Result<crate::constraint::Assignment, EngineError> {
        // every explored path condition was checked satisfiable when it was extended
        Ok(self.solver.full_model(pc)?.unwrap_or_default())
    }

    fn case_from_trace(
        &self,
        pc: &PathCondition,
        kind: ViolationKind,
        trace: Vec<Action>,
    ) -> Result<ReplayCase, EngineError> {
        let inputs = self.inputs_for(pc)?;
        Ok(ReplayCase::new(inputs, self.opts.buffer, kind, self.prop.into(), trace))
    }
}

fn budget(why: String) -> Outcome {
    (Verdict::BudgetExceeded, None, Some(why))
}
