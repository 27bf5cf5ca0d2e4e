//! Random small programs for property suites and the `gen` subcommand.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lang::{BinOp, Block, Comm, Expr, Peer, Program, Stmt, SymInput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub max_procs: usize,
    /// Upper bound on communication statements per process, waits included.
    pub max_ops: usize,
    /// Declare one input and branch on it in process 0.
    pub with_input: bool,
    /// Probability that every process gets the same number of barriers.
    pub aligned_barriers: f64,
    /// Probability of building the program from matched send/receive pairs.
    pub balanced: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_procs: 3, max_ops: 4, with_input: false, aligned_barriers: 0.7, balanced: 0.5 }
    }
}

fn peer_rank<R: Rng>(rng: &mut R, me: usize, n: usize) -> i64 {
    let others: Vec<usize> = (0..n).filter(|&r| r != me).collect();
    *others.choose(rng).expect("at least two processes") as i64
}

fn random_ops<R: Rng>(rng: &mut R, me: usize, n: usize, budget: usize, barriers: usize) -> Vec<Stmt> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut barriers_left = barriers;
    let mut next_req = 0;
    let comm = |c: Comm| Stmt::Comm(c, None);
    while out.len() + pending.len() + barriers_left < budget {
        let room = budget - out.len() - pending.len() - barriers_left;
        if !pending.is_empty() && rng.gen_bool(0.3) {
            let r = pending.remove(rng.gen_range(0..pending.len()));
            out.push(comm(Comm::Wait(r)));
            continue;
        }
        if barriers_left > 0 && rng.gen_bool(0.3) {
            out.push(comm(Comm::Barrier));
            barriers_left -= 1;
            continue;
        }
        let choice = rng.gen_range(0..if room >= 2 { 7 } else { 4 });
        let dst = Expr::Int(peer_rank(rng, me, n));
        let src = if rng.gen_bool(0.4) { Peer::Any } else { Peer::Rank(Expr::Int(peer_rank(rng, me, n))) };
        match choice {
            0 => out.push(comm(Comm::Send(dst))),
            1 => out.push(comm(Comm::Ssend(dst))),
            2 | 3 => out.push(comm(Comm::Recv(src))),
            4 => {
                let r = format!("r{next_req}");
                next_req += 1;
                out.push(comm(Comm::ISend(dst, r.clone())));
                pending.push(r);
            }
            _ => {
                let r = format!("r{next_req}");
                next_req += 1;
                out.push(comm(Comm::IRecv(src, r.clone())));
                pending.push(r);
            }
        }
        if rng.gen_bool(0.25) {
            break;
        }
    }
    for _ in 0..barriers_left {
        let at = rng.gen_range(0..=out.len());
        out.insert(at, comm(Comm::Barrier));
    }
    for r in pending {
        out.push(comm(Comm::Wait(r)));
    }
    out
}

/// Per-process operations built from sender/receiver pairs created in a global
/// order, then perturbed by an occasional adjacent swap.
fn balanced_ops<R: Rng>(rng: &mut R, n: usize, budget: usize, barrier: bool) -> Vec<Vec<Stmt>> {
    let comm = |c: Comm| Stmt::Comm(c, None);
    let mut ops: Vec<Vec<Stmt>> = vec![Vec::new(); n];
    let mut waits: Vec<Vec<String>> = vec![Vec::new(); n];
    let reserved = usize::from(barrier);
    let room = |ops: &[Vec<Stmt>], waits: &[Vec<String>], r: usize| budget - reserved - ops[r].len() - waits[r].len();
    let pairs = rng.gen_range(1..=budget.max(1));
    for _ in 0..pairs {
        let s = rng.gen_range(0..n);
        let r = peer_rank(rng, s, n) as usize;
        if room(&ops, &waits, s) < 2 || room(&ops, &waits, r) < 2 {
            continue;
        }
        let src = if rng.gen_bool(0.4) { Peer::Any } else { Peer::Rank(Expr::Int(s as i64)) };
        let send = match rng.gen_range(0..3) {
            0 => Comm::Send(Expr::Int(r as i64)),
            1 => Comm::Ssend(Expr::Int(r as i64)),
            _ => {
                let req = format!("r{}", ops[s].len());
                waits[s].push(req.clone());
                Comm::ISend(Expr::Int(r as i64), req)
            }
        };
        let recv = if rng.gen_bool(0.3) {
            let req = format!("r{}", ops[r].len());
            waits[r].push(req.clone());
            Comm::IRecv(src, req)
        } else {
            Comm::Recv(src)
        };
        ops[s].push(comm(send));
        ops[r].push(comm(recv));
    }
    for (rank, body) in ops.iter_mut().enumerate() {
        if body.len() >= 2 && rng.gen_bool(0.3) {
            let at = rng.gen_range(0..body.len() - 1);
            body.swap(at, at + 1);
        }
        if barrier {
            let at = rng.gen_range(0..=body.len());
            body.insert(at, comm(Comm::Barrier));
        }
        for req in waits[rank].drain(..) {
            body.push(comm(Comm::Wait(req)));
        }
    }
    ops
}

/// `ops` with one adjacent pair of non-wait statements swapped, when there is one.
fn perturbed<R: Rng>(rng: &mut R, ops: &[Stmt]) -> Vec<Stmt> {
    let is_wait = |s: &Stmt| matches!(s, Stmt::Comm(Comm::Wait(_), _));
    let mut out = ops.to_vec();
    let spots: Vec<usize> = (0..out.len().saturating_sub(1))
        .filter(|&i| !is_wait(&out[i]) && !is_wait(&out[i + 1]))
        .collect();
    if let Some(&at) = spots.choose(rng) {
        out.swap(at, at + 1);
    }
    out
}

/// A random program with 2 to `max_procs` processes.
pub fn random_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Program {
    let n = rng.gen_range(2..=cfg.max_procs.max(2));
    let aligned = rng.gen_bool(cfg.aligned_barriers);
    let shared_barriers = if aligned && rng.gen_bool(0.4) { 1 } else { 0 };
    let barriers_for = |rng: &mut R| if aligned { shared_barriers } else { rng.gen_range(0..=1) };
    let balanced = rng.gen_bool(cfg.balanced).then(|| balanced_ops(rng, n, cfg.max_ops, shared_barriers == 1));
    let mut processes: Vec<Block> = Vec::with_capacity(n);
    for me in 0..n {
        let b = barriers_for(rng);
        let ops = match &balanced {
            Some(all) => all[me].clone(),
            None => random_ops(rng, me, n, cfg.max_ops, b),
        };
        let body: Vec<Stmt> = if cfg.with_input && me == 0 {
            let alt = match &balanced {
                Some(_) => perturbed(rng, &ops),
                None => random_ops(rng, me, n, cfg.max_ops, b),
            };
            let cond = Expr::bin(BinOp::Gt, Expr::Sym("x".into()), Expr::Int(1));
            vec![Stmt::If(cond, ops.into(), alt.into())]
        } else {
            ops
        };
        processes.push(body.into());
    }
    let sym_inputs = if cfg.with_input {
        vec![SymInput { name: "x".into(), low: 0, high: 3 }]
    } else {
        Vec::new()
    };
    Program { processes, sym_inputs }
}

/// Number of communication statements in `block`, counting both branches of conditionals.
pub fn comm_count(block: &[Stmt]) -> usize {
    block
        .iter()
        .map(|s| match s {
            Stmt::Comm(..) => 1,
            Stmt::If(_, t, e) => comm_count(t) + comm_count(e),
            Stmt::While(_, b) => comm_count(b),
            _ => 0,
        })
        .sum()
}
