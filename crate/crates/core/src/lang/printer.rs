use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Sym(name) | Expr::Var(name) => f.write_str(name),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Not(e) => write!(f, "!{e}"),
        }
    }
}

impl Display for Peer {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Peer::Any => f.write_str("*"),
            Peer::Rank(e) => write!(f, "{e}"),
        }
    }
}

impl Display for Comm {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Comm::Ssend(e) => write!(f, "ssend({e})"),
            Comm::Send(e) => write!(f, "send({e})"),
            Comm::Recv(p) => write!(f, "recv({p})"),
            Comm::Barrier => f.write_str("barrier"),
            Comm::ISend(e, r) => write!(f, "isend({e}, {r})"),
            Comm::IRecv(p, r) => write!(f, "irecv({p}, {r})"),
            Comm::Wait(r) => write!(f, "wait({r})"),
        }
    }
}

fn write_block(out: &mut String, block: &[Stmt], indent: usize) {
    for stmt in block {
        write_stmt(out, stmt, indent);
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, indent: usize) {
    let pad = "    ".repeat(indent);
    match stmt {
        Stmt::VarDecl(name) => {
            let _ = writeln!(out, "{pad}var {name} : int;");
        }
        Stmt::Assign(name, e) => {
            let _ = writeln!(out, "{pad}{name} := {e};");
        }
        Stmt::If(c, t, e) => {
            let _ = writeln!(out, "{pad}if ({c}) {{");
            write_block(out, t, indent + 1);
            if e.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, e, indent + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::While(c, body) => {
            let _ = writeln!(out, "{pad}while ({c}) {{");
            write_block(out, body, indent + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::Comm(comm, label) => match label {
            Some(l) => {
                let _ = writeln!(out, "{pad}{comm} @{l};");
            }
            None => {
                let _ = writeln!(out, "{pad}{comm};");
            }
        },
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for s in &self.sym_inputs {
            let _ = writeln!(out, "sym {} : int in [{}, {}];", s.name, s.low, s.high);
        }
        if !self.sym_inputs.is_empty() {
            out.push('\n');
        }
        for (rank, body) in self.processes.iter().enumerate() {
            if rank > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "proc {rank} {{");
            write_block(&mut out, body, 1);
            out.push_str("}\n");
        }
        f.write_str(&out)
    }
}

impl Display for PropertySpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            PropertySpec::DeadlockFree => f.write_str("deadlock_free"),
            PropertySpec::Before { first, second } => write!(f, "before {first} {second}"),
        }
    }
}
