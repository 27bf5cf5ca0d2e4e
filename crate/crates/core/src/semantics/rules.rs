use super::state::{Flag, GlobalState, ProcState};
use super::{Action, BufferMode, OpKind, OpRef, Operation, SemanticsError, Source};

/// Whether issuing `seq[index]` blocks its process until the operation is matched.
pub fn is_blocking(seq: &[Operation], index: usize, mode: BufferMode) -> bool {
    match &seq[index].kind {
        OpKind::Ssend { .. } | OpKind::Recv { .. } | OpKind::Barrier => true,
        OpKind::Send { .. } => mode == BufferMode::Zero,
        OpKind::ISend { .. } | OpKind::IRecv { .. } => false,
        OpKind::Wait { target, .. } => {
            !(mode == BufferMode::Infinite && matches!(seq[*target].kind, OpKind::ISend { .. }))
        }
    }
}

/// A wait on a nonblocking send completes at issue when sends are buffered.
fn completes_at_issue(seq: &[Operation], index: usize, mode: BufferMode) -> bool {
    matches!(seq[index].kind, OpKind::Wait { .. }) && !is_blocking(seq, index, mode)
}

/// Whether the unmatched operation `index` of `s` may be matched now, per the
/// non-overtaking rules. Operations that are not unmatched are never ready.
pub fn ready(s: &ProcState, index: usize) -> bool {
    if !s.is_unmatched(index) {
        return false;
    }
    let earlier = || s.unmatched.iter().filter(move |&&i| i < index).map(|&i| &s.seq[i].kind);
    match &s.seq[index].kind {
        OpKind::Wait { target, .. } => s.is_matched(*target),
        OpKind::Barrier => true,
        k if k.is_send() => {
            let dst = k.dst();
            !earlier().any(|e| e.is_send() && e.dst() == dst)
        }
        k => match k.src() {
            Some(Source::Any) => !earlier().any(|e| e.is_recv() && e.src() == Some(Source::Any)),
            Some(Source::Rank(r)) => !earlier()
                .any(|e| matches!(e.src(), Some(Source::Any)) || e.src() == Some(Source::Rank(r))),
            None => unreachable!("receive without a source"),
        },
    }
}

/// `recv` is posted by the send's destination and names the sender or `*`.
pub fn match_static(s: &GlobalState, send: OpRef, recv: OpRef) -> bool {
    let (sk, rk) = (&s.op(send).kind, &s.op(recv).kind);
    if !sk.is_send() || !rk.is_recv() {
        return false;
    }
    let source_ok = match rk.src() {
        Some(Source::Any) => true,
        Some(Source::Rank(k)) => k == send.rank,
        None => false,
    };
    sk.dst() == Some(recv.rank) && source_ok
}

/// Conditional completes-before: a receive may not take a message that an
/// earlier ready nonblocking receive for that specific sender must take.
pub fn cond_cb(s: &GlobalState, send: OpRef, recv: OpRef) -> bool {
    let receiver = &s.procs[recv.rank];
    !receiver.unmatched.iter().any(|&i| {
        i < recv.index
            && matches!(receiver.seq[i].kind, OpKind::IRecv { src: Source::Rank(k), .. } if k == send.rank)
            && ready(receiver, i)
            && match_static(s, send, OpRef::new(recv.rank, i))
    })
}

impl GlobalState {
    fn issue_enabled(&self, rank: usize) -> bool {
        self.procs[rank].next_comm().is_some()
    }

    fn barrier_enabled(&self) -> bool {
        self.procs.iter().all(|p| {
            p.flag == Flag::Blocked && p.unmatched.iter().any(|&i| p.seq[i].kind == OpKind::Barrier)
        })
    }

    fn wait_enabled(&self, op: OpRef) -> bool {
        let p = &self.procs[op.rank];
        p.flag == Flag::Blocked
            && op.index < p.seq.len()
            && matches!(p.seq[op.index].kind, OpKind::Wait { .. })
            && ready(p, op.index)
    }

    fn pair_enabled(&self, send: OpRef, recv: OpRef) -> bool {
        let valid = |r: OpRef| r.rank < self.procs.len() && r.index < self.procs[r.rank].seq.len();
        valid(send)
            && valid(recv)
            && ready(&self.procs[send.rank], send.index)
            && ready(&self.procs[recv.rank], recv.index)
            && match_static(self, send, recv)
            && cond_cb(self, send, recv)
    }

    /// Whether `a` may fire in this state.
    pub fn is_enabled(&self, a: &Action) -> bool {
        match *a {
            Action::Issue { rank, index } => {
                rank < self.procs.len() && self.issue_enabled(rank) && index == self.procs[rank].seq.len()
            }
            Action::Barrier => self.barrier_enabled(),
            Action::Wait { op } => op.rank < self.procs.len() && self.wait_enabled(op),
            Action::Sr { send, recv } => {
                self.pair_enabled(send, recv) && !self.op(recv).kind.is_wildcard()
            }
            Action::SrStar { send, recv } => {
                self.pair_enabled(send, recv) && self.op(recv).kind.is_wildcard()
            }
        }
    }

    /// Every enabled action: issues by rank, the barrier, waits, then pairs by `(send, recv)`.
    pub fn enabled(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for (rank, p) in self.procs.iter().enumerate() {
            if self.issue_enabled(rank) {
                out.push(Action::Issue { rank, index: p.seq.len() });
            }
        }
        if self.barrier_enabled() {
            out.push(Action::Barrier);
        }
        for (rank, p) in self.procs.iter().enumerate() {
            for &i in &p.unmatched {
                let op = OpRef::new(rank, i);
                if self.wait_enabled(op) {
                    out.push(Action::Wait { op });
                }
            }
        }
        for (srank, sp) in self.procs.iter().enumerate() {
            for &si in &sp.unmatched {
                let Some(dst) = sp.seq[si].kind.dst() else { continue };
                let send = OpRef::new(srank, si);
                if !ready(sp, si) {
                    continue;
                }
                let rp = &self.procs[dst];
                for &ri in &rp.unmatched {
                    let recv = OpRef::new(dst, ri);
                    if rp.seq[ri].kind.is_recv() && self.pair_enabled(send, recv) {
                        out.push(if rp.seq[ri].kind.is_wildcard() {
                            Action::SrStar { send, recv }
                        } else {
                            Action::Sr { send, recv }
                        });
                    }
                }
            }
        }
        out
    }

    /// The reduced set: lowest-rank issue, else the barrier, else the lowest-rank
    /// deterministic match (waits win ties), else every wildcard match.
    pub fn por_subset(&self) -> Vec<Action> {
        let en = self.enabled();
        if let Some(a) = en.iter().find(|a| matches!(a, Action::Issue { .. })) {
            return vec![*a];
        }
        if en.contains(&Action::Barrier) {
            return vec![Action::Barrier];
        }
        let det = en
            .iter()
            .filter(|a| matches!(a, Action::Wait { .. } | Action::Sr { .. }))
            .min_by_key(|a| (a.acting_rank(), !matches!(a, Action::Wait { .. })));
        match det {
            Some(a) => vec![*a],
            None => en,
        }
    }

    fn complete(&mut self, r: OpRef) -> bool {
        let mode = self.buffer;
        let p = &mut self.procs[r.rank];
        p.unmatched.retain(|&i| i != r.index);
        let at = p.matched.partition_point(|&i| i < r.index);
        p.matched.insert(at, r.index);
        if p.flag == Flag::Blocked && is_blocking(&p.seq, r.index, mode) {
            p.flag = Flag::Active;
            return true;
        }
        false
    }

    /// Applies `a`, returning the successor; `self` is left untouched.
    pub fn apply(&self, a: &Action) -> Result<GlobalState, SemanticsError> {
        if !self.is_enabled(a) {
            return Err(SemanticsError::NotEnabled(*a));
        }
        let mut next = self.clone();
        let mut woken = Vec::new();
        match *a {
            Action::Issue { rank, .. } => {
                let n = next.procs.len();
                let mode = next.buffer;
                let p = &mut next.procs[rank];
                let op = p.build_op(rank, n)?;
                p.advance_cursor();
                p.seq.push(op);
                let idx = p.seq.len() - 1;
                if completes_at_issue(&p.seq, idx, mode) {
                    p.matched.push(idx);
                } else {
                    p.unmatched.push(idx);
                }
                if is_blocking(&p.seq, idx, mode) {
                    p.flag = Flag::Blocked;
                } else {
                    woken.push(rank);
                }
            }
            Action::Barrier => {
                for rank in 0..next.procs.len() {
                    let p = &next.procs[rank];
                    let idx = *p
                        .unmatched
                        .iter()
                        .find(|&&i| p.seq[i].kind == OpKind::Barrier)
                        .expect("barrier enabled");
                    if next.complete(OpRef::new(rank, idx)) {
                        woken.push(rank);
                    }
                }
            }
            Action::Wait { op } => {
                if next.complete(op) {
                    woken.push(op.rank);
                }
            }
            Action::Sr { send, recv } | Action::SrStar { send, recv } => {
                next.matches.insert((send, recv));
                for r in [send, recv] {
                    if next.complete(r) {
                        woken.push(r.rank);
                    }
                }
            }
        }
        for rank in woken {
            next.procs[rank].run_local(rank)?;
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    const FIG5: &str = "
        proc 0 { isend(1, req1); barrier; wait(req1); }
        proc 1 { irecv(*, req2); barrier; wait(req2); }
        proc 2 { barrier; isend(1, req3); wait(req3); }
    ";

    fn run_issues(mut s: GlobalState) -> GlobalState {
        loop {
            let Some(a) = s.enabled().into_iter().find(|a| matches!(a, Action::Issue { .. })) else {
                return s;
            };
            s = s.apply(&a).unwrap();
        }
    }

    fn state(src: &str) -> GlobalState {
        GlobalState::initial(&parse_program(src).unwrap(), BufferMode::Infinite).unwrap()
    }

    #[test]
    fn fig5_first_block_enables_only_barrier() {
        let s = run_issues(state(FIG5));
        assert!(s.global_blocking());
        // the wildcard pair is co-enabled by the rules; the reduced set defers it
        assert_eq!(
            s.enabled(),
            vec![Action::Barrier, Action::SrStar { send: OpRef::new(0, 0), recv: OpRef::new(1, 0) }]
        );
        assert_eq!(s.por_subset(), vec![Action::Barrier]);
        let after = s.apply(&Action::Barrier).unwrap();
        for p in &s.procs {
            assert_eq!(p.flag, Flag::Blocked);
        }
        // every barrier matched, processes resumed
        let after_flags: Vec<_> = after.procs.iter().map(|p| p.flag).collect();
        assert_eq!(after_flags, vec![Flag::Active, Flag::Active, Flag::Active]);
        for p in &after.procs {
            assert!(p.matched.iter().any(|&i| p.seq[i].kind == OpKind::Barrier));
        }
    }

    #[test]
    fn fig5_second_block_has_two_wildcard_matches() {
        let s = run_issues(run_issues(state(FIG5)).apply(&Action::Barrier).unwrap());
        assert!(s.global_blocking());
        assert_eq!(s.procs[0].flag, Flag::Terminated);
        assert_eq!(s.procs[2].flag, Flag::Terminated);
        let p1 = &s.procs[1];
        assert_eq!(p1.flag, Flag::Blocked);
        // wait(req2) is issued but not ready: its receive is unmatched
        let wait_idx = 2;
        assert!(p1.is_unmatched(wait_idx));
        assert!(!ready(p1, wait_idx));
        let recv = OpRef::new(1, 0);
        assert_eq!(
            s.enabled(),
            vec![
                Action::SrStar { send: OpRef::new(0, 0), recv },
                Action::SrStar { send: OpRef::new(2, 1), recv },
            ]
        );
        assert_eq!(s.por_subset(), s.enabled());
    }

    #[test]
    fn ready_examples() {
        let s = run_issues(state("proc 0 { send(1); } proc 1 { barrier; }"));
        assert!(ready(&s.procs[0], 0));

        let s = run_issues(state("proc 0 { irecv(*, a); irecv(2, b); wait(a); } proc 1 { barrier; } proc 2 { barrier; }"));
        let p0 = &s.procs[0];
        assert!(ready(p0, 0));
        assert!(!ready(p0, 1));
        assert!(!ready(p0, 2));
    }

    #[test]
    fn static_matching() {
        let s = run_issues(state(
            "proc 0 { isend(1, a); isend(2, b); wait(a); wait(b); }
             proc 1 { irecv(0, c); irecv(*, d); wait(c); wait(d); }
             proc 2 { barrier; }
             proc 3 { send(1); }",
        ));
        assert!(match_static(&s, OpRef::new(0, 0), OpRef::new(1, 0)));
        assert!(match_static(&s, OpRef::new(3, 0), OpRef::new(1, 1)));
        assert!(!match_static(&s, OpRef::new(0, 1), OpRef::new(1, 0)));
        assert!(!match_static(&s, OpRef::new(3, 0), OpRef::new(1, 0)));
    }

    #[test]
    fn conditional_completes_before() {
        let s = run_issues(state(
            "proc 0 { send(1); }
             proc 1 { irecv(0, r1); irecv(*, r2); wait(r1); wait(r2); }
             proc 2 { send(1); }",
        ));
        let (irecv0, irecv_any) = (OpRef::new(1, 0), OpRef::new(1, 1));
        assert!(!cond_cb(&s, OpRef::new(0, 0), irecv_any));
        assert!(cond_cb(&s, OpRef::new(2, 0), irecv_any));
        assert!(cond_cb(&s, OpRef::new(0, 0), irecv0));
        let en = s.enabled();
        assert!(en.contains(&Action::Sr { send: OpRef::new(0, 0), recv: irecv0 }));
        assert!(en.contains(&Action::SrStar { send: OpRef::new(2, 0), recv: irecv_any }));
        assert!(!en.contains(&Action::SrStar { send: OpRef::new(0, 0), recv: irecv_any }));
    }

    #[test]
    fn buffered_send_does_not_block() {
        let s = state("proc 0 { send(1); } proc 1 { recv(0); }");
        let s = s.apply(&Action::Issue { rank: 0, index: 0 }).unwrap();
        assert_eq!(s.procs[0].flag, Flag::Terminated);
        let s = s.apply(&Action::Issue { rank: 1, index: 0 }).unwrap();
        assert_eq!(s.procs[1].flag, Flag::Blocked);

        let z = GlobalState::initial(
            &parse_program("proc 0 { send(1); } proc 1 { recv(0); }").unwrap(),
            BufferMode::Zero,
        )
        .unwrap();
        let z = z.apply(&Action::Issue { rank: 0, index: 0 }).unwrap();
        assert_eq!(z.procs[0].flag, Flag::Blocked);
    }

    #[test]
    fn terminated_everywhere_enables_nothing() {
        let s = run_issues(state("proc 0 { send(1); } proc 1 { recv(0); }"));
        let s = s.apply(&s.enabled()[0]).unwrap();
        assert!(s.all_terminated());
        assert!(s.enabled().is_empty());
    }

    #[test]
    fn por_prefers_lowest_issue_and_waits() {
        let s = state("proc 0 { send(1); } proc 1 { recv(0); } proc 2 { barrier; }");
        assert_eq!(s.por_subset(), vec![Action::Issue { rank: 0, index: 0 }]);
        let s = run_issues(state("proc 0 { barrier; } proc 1 { barrier; }"));
        assert_eq!(s.por_subset(), vec![Action::Barrier]);
    }

    #[test]
    fn disabled_action_is_rejected() {
        let s = state("proc 0 { barrier; }");
        assert_eq!(s.apply(&Action::Barrier), Err(SemanticsError::NotEnabled(Action::Barrier)));
    }

    #[test]
    fn independent_matches_commute() {
        let s = run_issues(state(
            "proc 0 { send(1); } proc 1 { recv(0); } proc 2 { send(3); } proc 3 { recv(2); }",
        ));
        let a = Action::Sr { send: OpRef::new(0, 0), recv: OpRef::new(1, 0) };
        let b = Action::Sr { send: OpRef::new(2, 0), recv: OpRef::new(3, 0) };
        let ab = s.apply(&a).unwrap().apply(&b).unwrap();
        let ba = s.apply(&b).unwrap().apply(&a).unwrap();
        assert_eq!(ab, ba);
    }
}
