use std::sync::Arc;

/// Binary and unary operators of the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

/// Expressions. Booleans are represented as the integers 0 and 1 at runtime.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(i64),
    /// A symbolic program input declared with `sym`.
    Sym(String),
    /// A process-local variable.
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Symbolic input names occurring in the expression, in first-occurrence order.
    pub fn sym_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) | Expr::Var(_) => {}
            Expr::Sym(name) => {
                if !out.iter().any(|n| n == name) {
                    out.push(name.clone());
                }
            }
            Expr::Bin(_, l, r) => {
                l.sym_vars(out);
                r.sym_vars(out);
            }
            Expr::Not(e) => e.sym_vars(out),
        }
    }
}

/// Source argument of a receive: a concrete rank expression or the wildcard `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Peer {
    Rank(Expr),
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comm {
    Ssend(Expr),
    Send(Expr),
    Recv(Peer),
    Barrier,
    ISend(Expr, String),
    IRecv(Peer, String),
    Wait(String),
}

/// A sequence of statements. Shared so that execution cursors can point into it cheaply.
pub type Block = Arc<[Stmt]>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stmt {
    VarDecl(String),
    Assign(String, Expr),
    If(Expr, Block, Block),
    While(Expr, Block),
    Comm(Comm, Option<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymInput {
    pub name: String,
    pub low: i64,
    pub high: i64,
}

/// A program: one statement block per process, indexed by rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub processes: Vec<Block>,
    pub sym_inputs: Vec<SymInput>,
}

impl Program {
    pub fn num_procs(&self) -> usize {
        self.processes.len()
    }

    /// All event labels attached to communication statements, in program order.
    pub fn labels(&self) -> Vec<String> {
        fn walk(block: &[Stmt], out: &mut Vec<String>) {
            for stmt in block {
                match stmt {
                    Stmt::Comm(_, Some(label)) => {
                        if !out.contains(label) {
                            out.push(label.clone());
                        }
                    }
                    Stmt::If(_, t, e) => {
                        walk(t, out);
                        walk(e, out);
                    }
                    Stmt::While(_, body) => walk(body, out),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        for p in &self.processes {
            walk(p, &mut out);
        }
        out
    }

    pub fn domains(&self) -> crate::constraint::Domains {
        self.sym_inputs
            .iter()
            .map(|s| (s.name.clone(), (s.low, s.high)))
            .collect()
    }
}

/// Properties the verifier can check.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropertySpec {
    DeadlockFree,
    /// `first` must not complete before `second` (the pattern `!first U second`).
    Before { first: String, second: String },
}
