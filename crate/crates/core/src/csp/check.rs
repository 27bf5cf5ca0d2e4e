use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use super::{ChanId, CspError, CspModel, EventId, Guard, Term};

pub const DEFAULT_CHECK_BUDGET: usize = 1_000_000;

const EMPTY: u8 = 0;
const FULL: u8 = 1;
const CONSUMED: u8 = 2;

const TICK: &str = "✓";

/// A checker configuration: the process term plus the state of every channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    pub term: Arc<Term>,
    pub chans: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Tau,
    Tick,
    Event(EventId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub label: Label,
    pub target: Config,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    Holds { states: usize },
    /// Visible events leading to the violation.
    Violation { trace: Vec<EventId>, states: usize },
}

impl CheckOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, CheckOutcome::Holds { .. })
    }

    pub fn states(&self) -> usize {
        match self {
            CheckOutcome::Holds { states } | CheckOutcome::Violation { states, .. } => *states,
        }
    }
}

/// Term-level moves before channel state is consulted.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Move {
    Tau,
    Tick,
    Event(EventId),
    Write { chan: ChanId, event: EventId },
    Read { chan: ChanId, event: EventId, guards: Arc<[Guard]> },
    /// A synchronous write paired with a read.
    Handshake { chan: ChanId, event: EventId, guards: Arc<[Guard]> },
}

fn moves(model: &CspModel, t: &Arc<Term>, out: &mut Vec<(Move, Arc<Term>)>) {
    match &**t {
        Term::Omega => {}
        Term::Skip => out.push((Move::Tick, Arc::new(Term::Omega))),
        Term::Event(e) => out.push((Move::Event(*e), Term::skip())),
        Term::Read { chan, event, guards, then } => {
            out.push((Move::Read { chan: *chan, event: *event, guards: guards.clone() }, then.clone()))
        }
        Term::Write { chan, event, then } => {
            out.push((Move::Write { chan: *chan, event: *event }, then.clone()))
        }
        Term::Seq(p, q) => {
            let mut inner = Vec::new();
            moves(model, p, &mut inner);
            for (m, p2) in inner {
                match m {
                    Move::Tick => out.push((Move::Tau, q.clone())),
                    m => out.push((m, Term::seq(p2, q.clone()))),
                }
            }
        }
        Term::Choice(alts) => {
            for (i, alt) in alts.iter().enumerate() {
                let mut inner = Vec::new();
                moves(model, alt, &mut inner);
                for (m, a2) in inner {
                    if m == Move::Tau {
                        let mut rest = alts.clone();
                        rest[i] = a2;
                        out.push((Move::Tau, Arc::new(Term::Choice(rest))));
                    } else {
                        out.push((m, a2));
                    }
                }
            }
        }
        Term::Par(l, r, sync) => par_moves(model, l, r, sync, out),
    }
}

fn par_moves(
    model: &CspModel,
    l: &Arc<Term>,
    r: &Arc<Term>,
    sync: &Arc<BTreeSet<EventId>>,
    out: &mut Vec<(Move, Arc<Term>)>,
) {
    if matches!(**l, Term::Omega) && matches!(**r, Term::Omega) {
        out.push((Move::Tick, Arc::new(Term::Omega)));
        return;
    }
    let mk = |a: Arc<Term>, b: Arc<Term>| Arc::new(Term::Par(a, b, sync.clone()));
    let (mut lm, mut rm) = (Vec::new(), Vec::new());
    moves(model, l, &mut lm);
    moves(model, r, &mut rm);
    let omega = || Arc::new(Term::Omega);
    for (m, l2) in &lm {
        match m {
            Move::Tick => out.push((Move::Tau, mk(omega(), r.clone()))),
            Move::Event(e) if sync.contains(e) => {
                for (m2, r2) in &rm {
                    if m2 == m {
                        out.push((m.clone(), mk(l2.clone(), r2.clone())));
                    }
                }
            }
            _ => out.push((m.clone(), mk(l2.clone(), r.clone()))),
        }
    }
    for (m, r2) in &rm {
        match m {
            Move::Tick => out.push((Move::Tau, mk(l.clone(), omega()))),
            Move::Event(e) if sync.contains(e) => {}
            _ => out.push((m.clone(), mk(l.clone(), r2.clone()))),
        }
    }
    let sync_chan = |c: ChanId| model.channels[c as usize].capacity == 0;
    for (ml, l2) in &lm {
        for (mr, r2) in &rm {
            let hs = match (ml, mr) {
                (Move::Write { chan: w, .. }, Move::Read { chan, event, guards })
                | (Move::Read { chan, event, guards }, Move::Write { chan: w, .. })
                    if w == chan && sync_chan(*chan) =>
                {
                    Move::Handshake { chan: *chan, event: *event, guards: guards.clone() }
                }
                _ => continue,
            };
            out.push((hs, mk(l2.clone(), r2.clone())));
        }
    }
}

fn guards_hold(chans: &[u8], guards: &[Guard]) -> bool {
    guards.iter().all(|g| match *g {
        Guard::Consumed(c) => chans[c as usize] == CONSUMED,
        Guard::Written(c) => chans[c as usize] != EMPTY,
    })
}

impl CspModel {
    pub fn initial(&self) -> Config {
        Config { term: self.root.clone(), chans: vec![EMPTY; self.channels.len()] }
    }

    /// Every transition of `cfg`, with channel capacities and guards applied.
    pub fn transitions(&self, cfg: &Config) -> Vec<Transition> {
        let mut ms = Vec::new();
        moves(self, &cfg.term, &mut ms);
        let mut out = Vec::with_capacity(ms.len());
        for (m, term) in ms {
            let mut chans = cfg.chans.clone();
            let label = match m {
                Move::Tau => Label::Tau,
                Move::Tick => Label::Tick,
                Move::Event(e) => Label::Event(e),
                Move::Write { chan, event } => {
                    let c = chan as usize;
                    if self.channels[c].capacity == 0 || chans[c] != EMPTY {
                        continue;
                    }
                    chans[c] = FULL;
                    self.label_of(event)
                }
                Move::Read { chan, event, guards } => {
                    let c = chan as usize;
                    if self.channels[c].capacity == 0 || chans[c] != FULL || !guards_hold(&chans, &guards) {
                        continue;
                    }
                    chans[c] = CONSUMED;
                    self.label_of(event)
                }
                Move::Handshake { chan, event, guards } => {
                    let c = chan as usize;
                    if chans[c] != EMPTY || !guards_hold(&chans, &guards) {
                        continue;
                    }
                    chans[c] = CONSUMED;
                    self.label_of(event)
                }
            };
            out.push(Transition { label, target: Config { term, chans } });
        }
        out
    }

    fn label_of(&self, e: EventId) -> Label {
        if self.events[e as usize].hidden {
            Label::Tau
        } else {
            Label::Event(e)
        }
    }

    /// Visible event names plus the termination event.
    pub fn alphabet(&self) -> BTreeSet<String> {
        let mut a: BTreeSet<String> =
            self.events.iter().filter(|m| !m.hidden).map(|m| m.name.clone()).collect();
        a.insert(TICK.to_string());
        a
    }

    fn visible_name(&self, l: Label) -> Option<String> {
        match l {
            Label::Tau => None,
            Label::Tick => Some(TICK.to_string()),
            Label::Event(e) => Some(self.events[e as usize].name.clone()),
        }
    }
}

/// Generic depth-first search over `(config, extra)` product states. `step`
/// returns `Err(())` on a violating transition and `Ok(Some(next))` to continue.
fn search<X, F, D>(model: &CspModel, start: X, budget: usize, mut step: F, dead: D) -> Result<CheckOutcome, CspError>
where
    X: Clone + Eq + std::hash::Hash,
    F: FnMut(&X, Label) -> Result<Option<X>, ()>,
    D: Fn(&Config, &X) -> bool,
{
    let init = (model.initial(), start);
    let mut parent: HashMap<(Config, X), Option<((Config, X), Label)>> = HashMap::new();
    parent.insert(init.clone(), None);
    let mut stack = vec![init];
    let trace_to = |parent: &HashMap<(Config, X), Option<((Config, X), Label)>>, mut node: (Config, X), last: Option<Label>| {
        let mut labels: Vec<Label> = last.into_iter().collect();
        while let Some(Some((prev, l))) = parent.get(&node) {
            labels.push(*l);
            node = prev.clone();
        }
        labels.reverse();
        labels
            .into_iter()
            .filter_map(|l| if let Label::Event(e) = l { Some(e) } else { None })
            .collect::<Vec<_>>()
    };
    while let Some(node) = stack.pop() {
        let ts = model.transitions(&node.0);
        if ts.is_empty() && dead(&node.0, &node.1) {
            let trace = trace_to(&parent, node, None);
            return Ok(CheckOutcome::Violation { trace, states: parent.len() });
        }
        for t in ts {
            let extra = match step(&node.1, t.label) {
                Err(()) => {
                    let trace = trace_to(&parent, node.clone(), Some(t.label));
                    return Ok(CheckOutcome::Violation { trace, states: parent.len() });
                }
                Ok(None) => continue,
                Ok(Some(x)) => x,
            };
            let next = (t.target, extra);
            if parent.contains_key(&next) {
                continue;
            }
            if parent.len() >= budget {
                return Err(CspError::Budget(budget));
            }
            parent.insert(next.clone(), Some((node.clone(), t.label)));
            stack.push(next);
        }
    }
    Ok(CheckOutcome::Holds { states: parent.len() })
}

/// Searches for a reachable configuration with no transitions that has not terminated.
pub fn check_deadlock(model: &CspModel, budget: usize) -> Result<CheckOutcome, CspError> {
    search(model, (), budget, |_, _| Ok(Some(())), |cfg, _| !matches!(*cfg.term, Term::Omega))
}

/// Searches for a trace in which an operation labelled `first` completes
/// before any operation labelled `second` has completed.
///
/// With `strict`, labels that no modeled event completes are an error;
/// otherwise they simply never occur.
pub fn check_before(
    model: &CspModel,
    first: &str,
    second: &str,
    budget: usize,
    strict: bool,
) -> Result<CheckOutcome, CspError> {
    let completing = |label: &str| -> Result<HashSet<EventId>, CspError> {
        let ops = model.labels.get(label).cloned().unwrap_or_default();
        let evs: HashSet<EventId> = model
            .events
            .iter()
            .enumerate()
            .filter(|(_, m)| m.ops.iter().any(|o| ops.contains(o)))
            .map(|(i, _)| i as EventId)
            .collect();
        if strict && evs.is_empty() {
            return Err(CspError::LabelUnmapped(label.to_string()));
        }
        Ok(evs)
    };
    let a = completing(first)?;
    let b = completing(second)?;
    search(
        model,
        false,
        budget,
        |seen_b, l| {
            let Label::Event(e) = l else { return Ok(Some(*seen_b)) };
            if b.contains(&e) {
                // nothing can be violated any more
                return Ok(None);
            }
            if a.contains(&e) && !seen_b {
                return Err(());
            }
            Ok(Some(*seen_b))
        },
        |_, _| false,
    )
}

type Dstate = BTreeSet<Config>;

fn tau_closure(model: &CspModel, seeds: impl IntoIterator<Item = Config>) -> Dstate {
    let mut out = BTreeSet::new();
    let mut stack: Vec<Config> = seeds.into_iter().collect();
    while let Some(c) = stack.pop() {
        if !out.insert(c.clone()) {
            continue;
        }
        for t in model.transitions(&c) {
            if t.label == Label::Tau {
                stack.push(t.target);
            }
        }
    }
    out
}

/// Acceptance sets of stable members, reduced to the minimal ones, plus visible successors.
fn analyse(model: &CspModel, d: &Dstate) -> (BTreeSet<BTreeSet<String>>, Vec<(String, Dstate)>) {
    let mut accs: Vec<BTreeSet<String>> = Vec::new();
    let mut succ: std::collections::BTreeMap<String, Vec<Config>> = Default::default();
    for c in d {
        let ts = model.transitions(c);
        let stable = ts.iter().all(|t| t.label != Label::Tau);
        let mut acc = BTreeSet::new();
        for t in ts {
            if let Some(name) = model.visible_name(t.label) {
                acc.insert(name.clone());
                succ.entry(name).or_default().push(t.target);
            }
        }
        if stable {
            accs.push(acc);
        }
    }
    let minimal: BTreeSet<BTreeSet<String>> = accs
        .iter()
        .filter(|a| !accs.iter().any(|b| b != *a && b.is_subset(a)))
        .cloned()
        .collect();
    let succ = succ.into_iter().map(|(n, cs)| (n, tau_closure(model, cs))).collect();
    (minimal, succ)
}

/// Stable failures as `(trace, maximal refusal)` pairs over the model's alphabet.
pub fn failures(model: &CspModel, bound: usize) -> Result<BTreeSet<(Vec<String>, BTreeSet<String>)>, CspError> {
    let alphabet = model.alphabet();
    let mut out = BTreeSet::new();
    let mut stack = vec![(Vec::<String>::new(), tau_closure(model, [model.initial()]))];
    while let Some((trace, d)) = stack.pop() {
        let (accs, succ) = analyse(model, &d);
        for acc in accs {
            out.insert((trace.clone(), alphabet.difference(&acc).cloned().collect()));
            if out.len() > bound {
                return Err(CspError::Budget(bound));
            }
        }
        for (name, d2) in succ {
            let mut t = trace.clone();
            t.push(name);
            stack.push((t, d2));
        }
    }
    Ok(out)
}

/// Whether two models have identical stable failures, compared by event name.
pub fn failures_equivalent(m1: &CspModel, m2: &CspModel, bound: usize) -> Result<bool, CspError> {
    let start = (tau_closure(m1, [m1.initial()]), tau_closure(m2, [m2.initial()]));
    let mut seen: HashSet<(Dstate, Dstate)> = HashSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some((d1, d2)) = queue.pop_front() {
        if !seen.insert((d1.clone(), d2.clone())) {
            continue;
        }
        if seen.len() > bound {
            return Err(CspError::Budget(bound));
        }
        let (acc1, succ1) = analyse(m1, &d1);
        let (acc2, succ2) = analyse(m2, &d2);
        if acc1 != acc2 {
            return Ok(false);
        }
        let names1: Vec<&String> = succ1.iter().map(|(n, _)| n).collect();
        let names2: Vec<&String> = succ2.iter().map(|(n, _)| n).collect();
        if names1 != names2 {
            return Ok(false);
        }
        for ((_, a), (_, b)) in succ1.into_iter().zip(succ2) {
            queue.push_back((a, b));
        }
    }
    Ok(true)
}
