use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::lang::{Comm, Expr, Peer, Program, Stmt};
use crate::semantics::{
    explore, BufferMode, ExploreMode, GlobalState, OpKind, OpRef, Operation, Source, DEFAULT_EXPLORE_BUDGET,
};

use super::{ChanId, Channel, CspError, CspModel, EventId, EventMeta, Guard, Term};

/// Candidate-send computation for receives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SmoMode {
    /// Drop candidates ruled out by barrier ordering.
    #[default]
    Optimized,
    /// Every statically matching send.
    Unoptimized,
}

/// Number of barriers issued before each operation of `seq`.
fn epochs(seq: &[Operation]) -> Vec<usize> {
    let mut n = 0;
    seq.iter()
        .map(|op| {
            let e = n;
            if op.kind == OpKind::Barrier {
                n += 1;
            }
            e
        })
        .collect()
}

fn wait_of(seq: &[Operation], index: usize) -> Option<usize> {
    seq.iter().position(|op| matches!(op.kind, OpKind::Wait { target, .. } if target == index))
}

/// Barrier epoch by which the operation must have completed, or `None` if unbounded.
fn completion_bound(s: &GlobalState, op: OpRef) -> Option<usize> {
    let seq = &s.procs[op.rank].seq;
    let ep = epochs(seq);
    let zero = s.buffer == BufferMode::Zero;
    match seq[op.index].kind {
        OpKind::Recv { .. } | OpKind::Ssend { .. } => Some(ep[op.index]),
        OpKind::Send { .. } if zero => Some(ep[op.index]),
        OpKind::ISend { .. } if zero => wait_of(seq, op.index).map(|w| ep[w]),
        OpKind::IRecv { .. } => wait_of(seq, op.index).map(|w| ep[w]),
        _ => None,
    }
}

fn epoch_of(s: &GlobalState, op: OpRef) -> usize {
    epochs(&s.procs[op.rank].seq)[op.index]
}

/// Sends that may be matched with `recv`, ascending by `(rank, index)`.
pub fn smo(s: &GlobalState, recv: OpRef, mode: SmoMode) -> Vec<OpRef> {
    let src = s.op(recv).kind.src().expect("smo on a receive");
    let static_ok = |send: OpRef| {
        let k = &s.op(send).kind;
        k.is_send()
            && k.dst() == Some(recv.rank)
            && match src {
                Source::Any => true,
                Source::Rank(r) => r == send.rank,
            }
    };
    let recv_bound = completion_bound(s, recv);
    let recv_epoch = epoch_of(s, recv);
    s.all_ops()
        .filter(|&send| static_ok(send))
        .filter(|&send| match mode {
            SmoMode::Unoptimized => true,
            SmoMode::Optimized => {
                let issued_too_late = recv_bound.is_some_and(|b| epoch_of(s, send) > b);
                let gone_too_early = completion_bound(s, send).is_some_and(|b| recv_epoch > b);
                !issued_too_late && !gone_too_early
            }
        })
        .collect()
}

/// An ordering dependency of a read.
enum Dep {
    /// An earlier send on the same sender/receiver pair; it must be read first.
    EarlierSend(OpRef),
    /// An earlier nonblocking receive that could take the same message; it must complete first.
    EarlierIRecv(OpRef),
}

struct Builder<'a> {
    state: &'a GlobalState,
    channels: Vec<Channel>,
    events: Vec<EventMeta>,
    by_name: HashMap<String, EventId>,
    send_chan: BTreeMap<OpRef, ChanId>,
    tokens: BTreeMap<OpRef, (ChanId, EventId)>,
}

impl<'a> Builder<'a> {
    fn new(state: &'a GlobalState) -> Self {
        Builder {
            state,
            channels: Vec::new(),
            events: Vec::new(),
            by_name: HashMap::new(),
            send_chan: BTreeMap::new(),
            tokens: BTreeMap::new(),
        }
    }

    fn event(&mut self, name: String, ops: Vec<OpRef>, pair: Option<(OpRef, OpRef)>) -> EventId {
        if let Some(&id) = self.by_name.get(&name) {
            return id;
        }
        let id = self.events.len() as EventId;
        self.by_name.insert(name.clone(), id);
        self.events.push(EventMeta { name, ops, pair, hidden: false });
        id
    }

    fn channel(&mut self, name: String, capacity: u8, hidden: bool, origin: Option<OpRef>) -> ChanId {
        self.channels.push(Channel { name, capacity, hidden, origin });
        (self.channels.len() - 1) as ChanId
    }

    fn declare_send_channels(&mut self) {
        let zero = self.state.buffer == BufferMode::Zero;
        let sends: Vec<OpRef> = self.state.all_ops().filter(|&o| self.state.op(o).kind.is_send()).collect();
        for s in sends {
            let sync = matches!(self.state.op(s).kind, OpKind::Ssend { .. }) || zero;
            let c = self.channel(format!("c{}_{}", s.rank, s.index), if sync { 0 } else { 1 }, false, Some(s));
            self.send_chan.insert(s, c);
        }
    }

    /// Operations that must be consumed before `recv` may take the message of `send`.
    fn deps(&self, send: OpRef, recv: OpRef) -> Vec<Dep> {
        let mut out = Vec::new();
        let sp = &self.state.procs[send.rank];
        for i in 0..send.index {
            let k = &sp.seq[i].kind;
            if k.is_send() && k.dst() == Some(recv.rank) {
                out.push(Dep::EarlierSend(OpRef::new(send.rank, i)));
            }
        }
        let rp = &self.state.procs[recv.rank];
        for i in 0..recv.index {
            if let OpKind::IRecv { src, .. } = rp.seq[i].kind {
                if src == Source::Any || src == Source::Rank(send.rank) {
                    out.push(Dep::EarlierIRecv(OpRef::new(recv.rank, i)));
                }
            }
        }
        out
    }

    fn token(&mut self, irecv: OpRef) -> (ChanId, EventId) {
        if let Some(&t) = self.tokens.get(&irecv) {
            return t;
        }
        let name = format!("t{}_{}", irecv.rank, irecv.index);
        let c = self.channel(name.clone(), 1, true, None);
        let e = self.event(format!("{name}!"), Vec::new(), None);
        self.events[e as usize].hidden = true;
        self.tokens.insert(irecv, (c, e));
        (c, e)
    }

    fn read_event(&mut self, send: OpRef, recv: OpRef) -> EventId {
        let chan = self.send_chan[&send];
        let ops = if self.channels[chan as usize].capacity == 0 { vec![send, recv] } else { vec![recv] };
        let name = format!("c{}_{}?m{}_{}", send.rank, send.index, recv.rank, recv.index);
        self.event(name, ops, Some((send, recv)))
    }

    /// The receive's external choice over candidate reads, with ordering guards.
    fn refine(&mut self, recv: OpRef, cands: &[OpRef], needs_token: bool) -> Arc<Term> {
        let after: Arc<Term> = if needs_token {
            let (c, e) = self.token(recv);
            Arc::new(Term::Write { chan: c, event: e, then: Term::skip() })
        } else {
            Term::skip()
        };
        let mut reads = Vec::with_capacity(cands.len());
        for &send in cands {
            let mut guards = Vec::new();
            for dep in self.deps(send, recv) {
                guards.push(match dep {
                    Dep::EarlierSend(s) => Guard::Consumed(self.send_chan[&s]),
                    Dep::EarlierIRecv(r) => Guard::Written(self.token(r).0),
                });
            }
            let event = self.read_event(send, recv);
            reads.push(Arc::new(Term::Read {
                chan: self.send_chan[&send],
                event,
                guards: guards.into(),
                then: after.clone(),
            }));
        }
        if reads.len() == 1 {
            reads.pop().unwrap()
        } else {
            Arc::new(Term::Choice(reads))
        }
    }

    fn process(&mut self, rank: usize, cands: &BTreeMap<OpRef, Vec<OpRef>>, needs_token: &BTreeSet<OpRef>) -> Arc<Term> {
        let seq = self.state.procs[rank].seq.clone();
        let ep = epochs(&seq);
        let zero = self.state.buffer == BufferMode::Zero;
        let wait_event = |b: &mut Self, w: usize| b.event(format!("w_{rank}_{w}"), vec![OpRef::new(rank, w)], None);
        let mut p = Term::skip();
        for idx in (0..seq.len()).rev() {
            let me = OpRef::new(rank, idx);
            p = match &seq[idx].kind {
                OpKind::Ssend { .. } | OpKind::Send { .. } => {
                    let chan = self.send_chan[&me];
                    let event = self.write_event(me);
                    Arc::new(Term::Write { chan, event, then: p })
                }
                OpKind::ISend { .. } => {
                    let chan = self.send_chan[&me];
                    let event = self.write_event(me);
                    if zero {
                        match wait_of(&seq, idx) {
                            Some(w) => {
                                let ew = wait_event(self, w);
                                let left = Arc::new(Term::Write { chan, event, then: Term::event(ew) });
                                Term::par(left, p, BTreeSet::from([ew]))
                            }
                            None => {
                                let left = Arc::new(Term::Write { chan, event, then: Term::skip() });
                                Term::par(left, p, BTreeSet::new())
                            }
                        }
                    } else {
                        Arc::new(Term::Write { chan, event, then: p })
                    }
                }
                OpKind::Barrier => {
                    let b = self.event(format!("B_{}", ep[idx]), Vec::new(), None);
                    self.events[b as usize].ops.push(me);
                    Term::seq(Term::event(b), p)
                }
                OpKind::Recv { .. } => {
                    let q = self.refine(me, &cands[&me], needs_token.contains(&me));
                    Term::seq(q, p)
                }
                OpKind::IRecv { .. } => {
                    let q = self.refine(me, &cands[&me], needs_token.contains(&me));
                    match wait_of(&seq, idx) {
                        Some(w) => {
                            let ew = wait_event(self, w);
                            Term::par(Term::seq(q, Term::event(ew)), p, BTreeSet::from([ew]))
                        }
                        None => Term::par(q, p, BTreeSet::new()),
                    }
                }
                OpKind::Wait { target, .. } => {
                    let modeled = matches!(seq[*target].kind, OpKind::IRecv { .. }) || zero;
                    if modeled {
                        let ew = wait_event(self, idx);
                        Term::seq(Term::event(ew), p)
                    } else {
                        p
                    }
                }
            };
        }
        p
    }

    fn write_event(&mut self, send: OpRef) -> EventId {
        let chan = self.send_chan[&send];
        let buffered = self.channels[chan as usize].capacity == 1;
        let name = format!("c{}_{}!", send.rank, send.index);
        self.event(name, if buffered { vec![send] } else { Vec::new() }, None)
    }

    fn build(mut self, cands: BTreeMap<OpRef, Vec<OpRef>>) -> CspModel {
        self.declare_send_channels();
        // tokens are needed by irecvs that constrain some later receive
        let mut needs_token = BTreeSet::new();
        for (&recv, cs) in &cands {
            for &send in cs {
                for dep in self.deps(send, recv) {
                    if let Dep::EarlierIRecv(r) = dep {
                        needs_token.insert(r);
                    }
                }
            }
        }
        let n = self.state.num_procs();
        let terms: Vec<Arc<Term>> = (0..n).map(|r| self.process(r, &cands, &needs_token)).collect();
        let barriers: BTreeSet<EventId> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, m)| m.name.starts_with("B_"))
            .map(|(i, _)| i as EventId)
            .collect();
        let mut it = terms.into_iter();
        let mut root = it.next().unwrap_or_else(Term::skip);
        for t in it {
            root = Term::par(root, t, barriers.clone());
        }
        let mut labels: BTreeMap<String, Vec<OpRef>> = BTreeMap::new();
        for op in self.state.all_ops() {
            if let Some(l) = &self.state.op(op).label {
                labels.entry(l.clone()).or_default().push(op);
            }
        }
        CspModel { root, channels: self.channels, events: self.events, labels }
    }
}

fn receives(s: &GlobalState) -> Vec<OpRef> {
    s.all_ops().filter(|&o| s.op(o).kind.is_recv()).collect()
}

/// Builds the model of a terminated path.
pub fn generate_csp(s: &GlobalState, mode: SmoMode) -> CspModel {
    let cands = receives(s).into_iter().map(|r| (r, smo(s, r, mode))).collect();
    Builder::new(s).build(cands)
}

/// The straight-line program replaying each process's issue log.
fn path_program(s: &GlobalState) -> Program {
    let lit = |r: usize| Expr::Int(r as i64);
    let peer = |src: &Source| match src {
        Source::Any => Peer::Any,
        Source::Rank(r) => Peer::Rank(lit(*r)),
    };
    let processes = s
        .procs
        .iter()
        .map(|p| {
            let body: Vec<Stmt> = p
                .seq
                .iter()
                .enumerate()
                .map(|(i, op)| {
                    let comm = match &op.kind {
                        OpKind::Ssend { dst } => Comm::Ssend(lit(*dst)),
                        OpKind::Send { dst } => Comm::Send(lit(*dst)),
                        OpKind::ISend { dst, .. } => Comm::ISend(lit(*dst), format!("r{i}")),
                        OpKind::Recv { src } => Comm::Recv(peer(src)),
                        OpKind::IRecv { src, .. } => Comm::IRecv(peer(src), format!("r{i}")),
                        OpKind::Barrier => Comm::Barrier,
                        OpKind::Wait { target, .. } => Comm::Wait(format!("r{target}")),
                    };
                    Stmt::Comm(comm, op.label.clone())
                })
                .collect();
            body.into()
        })
        .collect();
    Program { processes, sym_inputs: Vec::new() }
}

/// The model with candidate sets replaced by the matchings reachable in the semantics.
pub fn ideal_model(s: &GlobalState) -> Result<CspModel, CspError> {
    let prog = path_program(s);
    let init = GlobalState::initial(&prog, s.buffer)?;
    let reach = explore(&init, ExploreMode::Full, DEFAULT_EXPLORE_BUDGET)?;
    let mut cands: BTreeMap<OpRef, Vec<OpRef>> = receives(s).into_iter().map(|r| (r, Vec::new())).collect();
    for (send, recv) in reach.pairs {
        cands.entry(recv).or_default().push(send);
    }
    for v in cands.values_mut() {
        v.sort();
    }
    Ok(Builder::new(s).build(cands))
}
