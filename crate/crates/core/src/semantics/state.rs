use std::collections::{BTreeMap, BTreeSet};

use crate::constraint::{eval_expr, Assignment, ConstraintError, PathCondition, SymValue};
use crate::lang::{Block, Comm, Expr, Peer, Program, Stmt};

use super::{BufferMode, OpKind, OpRef, Operation, SemanticsError, Source};

/// Upper bound on local (non-communicating) statements run in one burst.
pub const LOCAL_STEP_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    Active,
    Blocked,
    Terminated,
}

/// A cursor into a statement block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    pub block: Block,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcState {
    pub env: BTreeMap<String, SymValue>,
    /// Continuation; the innermost block is last.
    pub frames: Vec<Frame>,
    pub pc: PathCondition,
    pub flag: Flag,
    /// Issue indices of operations not yet matched, in issue order.
    pub unmatched: Vec<usize>,
    /// Issue indices of matched operations, ascending.
    pub matched: Vec<usize>,
    /// Every operation issued so far.
    pub seq: Vec<Operation>,
}

impl ProcState {
    fn new(body: Block, env: BTreeMap<String, SymValue>) -> Self {
        ProcState {
            env,
            frames: vec![Frame { block: body, pos: 0 }],
            pc: PathCondition::new(),
            flag: Flag::Active,
            unmatched: Vec::new(),
            matched: Vec::new(),
            seq: Vec::new(),
        }
    }

    /// The statement the process will execute next, if any.
    pub fn next_stmt(&self) -> Option<&Stmt> {
        let f = self.frames.last()?;
        f.block.get(f.pos)
    }

    /// The communication statement the process is about to issue.
    pub fn next_comm(&self) -> Option<(&Comm, Option<&String>)> {
        if self.flag != Flag::Active {
            return None;
        }
        match self.next_stmt()? {
            Stmt::Comm(c, l) => Some((c, l.as_ref())),
            _ => None,
        }
    }

    pub fn is_unmatched(&self, index: usize) -> bool {
        self.unmatched.contains(&index)
    }

    pub fn is_matched(&self, index: usize) -> bool {
        self.matched.contains(&index)
    }

    fn lookup(&self, name: &str) -> Option<SymValue> {
        self.env.get(name).cloned()
    }

    fn eval(&self, rank: usize, e: &Expr) -> Result<SymValue, SemanticsError> {
        eval_expr(e, &|n: &str| self.lookup(n)).map_err(|err| match err {
            ConstraintError::Unbound(name) => SemanticsError::UnboundVariable { rank, name },
            other => SemanticsError::UnboundVariable { rank, name: other.to_string() },
        })
    }

    fn eval_rank(&self, rank: usize, e: &Expr, nprocs: usize) -> Result<usize, SemanticsError> {
        match self.eval(rank, e)? {
            SymValue::Concrete(v) if v >= 0 && (v as usize) < nprocs => Ok(v as usize),
            SymValue::Concrete(value) => Err(SemanticsError::RankOutOfRange { rank, value }),
            SymValue::Symbolic(_) => Err(SemanticsError::SymbolicRank { rank, expr: e.to_string() }),
        }
    }

    fn drop_finished_frames(&mut self) {
        while let Some(f) = self.frames.last() {
            if f.pos < f.block.len() {
                break;
            }
            self.frames.pop();
        }
    }

    /// Runs local statements until a communication statement, a symbolic branch
    /// or the end of the program. Only acts on active processes.
    pub(crate) fn run_local(&mut self, rank: usize) -> Result<(), SemanticsError> {
        let mut steps = 0usize;
        while self.flag == Flag::Active {
            self.drop_finished_frames();
            let Some(stmt) = self.next_stmt().cloned() else {
                self.flag = Flag::Terminated;
                return Ok(());
            };
            steps += 1;
            if steps > LOCAL_STEP_LIMIT {
                return Err(SemanticsError::LocalStepLimit { rank });
            }
            let top = self.frames.len() - 1;
            match stmt {
                Stmt::Comm(..) => return Ok(()),
                Stmt::VarDecl(name) => {
                    self.env.insert(name, SymValue::Concrete(0));
                    self.frames[top].pos += 1;
                }
                Stmt::Assign(name, e) => {
                    let v = self.eval(rank, &e)?;
                    self.env.insert(name, v);
                    self.frames[top].pos += 1;
                }
                Stmt::If(c, _, _) | Stmt::While(c, _) => match self.eval(rank, &c)? {
                    SymValue::Concrete(v) => self.take_branch(v != 0),
                    SymValue::Symbolic(_) => return Ok(()),
                },
            }
        }
        Ok(())
    }

    /// The symbolic condition the process is paused at, if any.
    pub fn pending_branch(&self, rank: usize) -> Result<Option<Expr>, SemanticsError> {
        if self.flag != Flag::Active {
            return Ok(None);
        }
        match self.next_stmt() {
            Some(Stmt::If(c, _, _)) | Some(Stmt::While(c, _)) => match self.eval(rank, c)? {
                SymValue::Symbolic(e) => Ok(Some(e)),
                SymValue::Concrete(_) => Ok(None),
            },
            _ => Ok(None),
        }
    }

    /// Enters the branch of the `if`/`while` at the cursor selected by `taken`.
    fn take_branch(&mut self, taken: bool) {
        let top = self.frames.len() - 1;
        let stmt = self.frames[top].block[self.frames[top].pos].clone();
        match stmt {
            Stmt::If(_, then_b, else_b) => {
                self.frames[top].pos += 1;
                let block = if taken { then_b } else { else_b };
                self.frames.push(Frame { block, pos: 0 });
            }
            Stmt::While(_, body) => {
                if taken {
                    self.frames.push(Frame { block: body, pos: 0 });
                } else {
                    self.frames[top].pos += 1;
                }
            }
            _ => unreachable!("take_branch at a non-branch statement"),
        }
    }

    /// Builds the operation for the communication statement at the cursor.
    pub(crate) fn build_op(&self, rank: usize, nprocs: usize) -> Result<Operation, SemanticsError> {
        let Some((comm, label)) = self.next_comm() else {
            unreachable!("build_op without a pending communication");
        };
        let src = |p: &Peer| -> Result<Source, SemanticsError> {
            match p {
                Peer::Any => Ok(Source::Any),
                Peer::Rank(e) => Ok(Source::Rank(self.eval_rank(rank, e, nprocs)?)),
            }
        };
        let kind = match comm {
            Comm::Ssend(e) => OpKind::Ssend { dst: self.eval_rank(rank, e, nprocs)? },
            Comm::Send(e) => OpKind::Send { dst: self.eval_rank(rank, e, nprocs)? },
            Comm::ISend(e, r) => OpKind::ISend { dst: self.eval_rank(rank, e, nprocs)?, req: r.clone() },
            Comm::Recv(p) => OpKind::Recv { src: src(p)? },
            Comm::IRecv(p, r) => OpKind::IRecv { src: src(p)?, req: r.clone() },
            Comm::Barrier => OpKind::Barrier,
            Comm::Wait(r) => {
                let target = self
                    .seq
                    .iter()
                    .rposition(|op| match &op.kind {
                        OpKind::ISend { req, .. } | OpKind::IRecv { req, .. } => req == r,
                        _ => false,
                    })
                    .ok_or_else(|| SemanticsError::UnknownRequest { rank, req: r.clone() })?;
                OpKind::Wait { req: r.clone(), target }
            }
        };
        Ok(Operation { kind, label: label.cloned() })
    }

    pub(crate) fn advance_cursor(&mut self) {
        let top = self.frames.len() - 1;
        self.frames[top].pos += 1;
    }
}

/// The product of all process states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    pub procs: Vec<ProcState>,
    /// Matched `(send, receive)` pairs.
    pub matches: BTreeSet<(OpRef, OpRef)>,
    pub buffer: BufferMode,
}

impl GlobalState {
    /// Initial state with symbolic inputs bound to themselves.
    pub fn initial(program: &Program, buffer: BufferMode) -> Result<Self, SemanticsError> {
        let env = program
            .sym_inputs
            .iter()
            .map(|s| (s.name.clone(), SymValue::Symbolic(Expr::Sym(s.name.clone()))))
            .collect();
        Self::with_env(program, buffer, env)
    }

    /// Initial state with symbolic inputs bound to concrete values.
    pub fn concrete(program: &Program, buffer: BufferMode, inputs: &Assignment) -> Result<Self, SemanticsError> {
        let env = program
            .sym_inputs
            .iter()
            .map(|s| {
                let v = inputs.get(&s.name).copied().unwrap_or(s.low);
                (s.name.clone(), SymValue::Concrete(v))
            })
            .collect();
        Self::with_env(program, buffer, env)
    }

    fn with_env(
        program: &Program,
        buffer: BufferMode,
        env: BTreeMap<String, SymValue>,
    ) -> Result<Self, SemanticsError> {
        let mut procs = Vec::with_capacity(program.num_procs());
        for (rank, body) in program.processes.iter().enumerate() {
            let mut p = ProcState::new(body.clone(), env.clone());
            p.run_local(rank)?;
            procs.push(p);
        }
        Ok(GlobalState { procs, matches: BTreeSet::new(), buffer })
    }

    pub fn num_procs(&self) -> usize {
        self.procs.len()
    }

    pub fn op(&self, r: OpRef) -> &Operation {
        &self.procs[r.rank].seq[r.index]
    }

    /// Conjunction of every process's path condition.
    pub fn path_condition(&self) -> PathCondition {
        let mut pc = PathCondition::new();
        for p in &self.procs {
            pc.conjuncts.extend(p.pc.conjuncts.iter().cloned());
        }
        pc
    }

    pub fn all_terminated(&self) -> bool {
        self.procs.iter().all(|p| p.flag == Flag::Terminated)
    }

    pub fn any_blocked(&self) -> bool {
        self.procs.iter().any(|p| p.flag == Flag::Blocked)
    }

    /// Every process is blocked or terminated, and at least one is blocked.
    pub fn global_blocking(&self) -> bool {
        self.any_blocked() && self.procs.iter().all(|p| p.flag != Flag::Active)
    }

    /// Lowest-ranked process paused at a symbolic branch, with its condition.
    pub fn pending_branch(&self) -> Result<Option<(usize, Expr)>, SemanticsError> {
        for (rank, p) in self.procs.iter().enumerate() {
            if let Some(c) = p.pending_branch(rank)? {
                return Ok(Some((rank, c)));
            }
        }
        Ok(None)
    }

    /// Takes one side of `rank`'s pending branch, recording `conjunct` in its path condition.
    pub fn resolve_branch(
        &self,
        rank: usize,
        taken: bool,
        conjunct: Option<Expr>,
    ) -> Result<GlobalState, SemanticsError> {
        let mut next = self.clone();
        let p = &mut next.procs[rank];
        p.take_branch(taken);
        if let Some(c) = conjunct {
            p.pc.push(c);
        }
        p.run_local(rank)?;
        Ok(next)
    }

    /// All `(send, recv)` pairs in matched order per process, ascending.
    pub fn matched_pairs(&self) -> Vec<(OpRef, OpRef)> {
        self.matches.iter().copied().collect()
    }

    /// Every issued operation reference, ascending by `(rank, index)`.
    pub fn all_ops(&self) -> impl Iterator<Item = OpRef> + '_ {
        self.procs
            .iter()
            .enumerate()
            .flat_map(|(rank, p)| (0..p.seq.len()).map(move |index| OpRef { rank, index }))
    }
}
