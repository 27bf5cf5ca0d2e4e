use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::{ParseError, DEFAULT_DOMAIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Bool => "bool",
        })
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    /// requests declared so far in the current process (textual order)
    requests: HashSet<String>,
    /// literal ranks used as destinations/sources, checked once the process count is known
    literal_ranks: Vec<(i64, usize, usize)>,
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        requests: HashSet::new(),
        literal_ranks: Vec::new(),
    };
    let mut processes: Vec<Block> = Vec::new();
    let mut sym_inputs: Vec<SymInput> = Vec::new();
    loop {
        let (line, col) = p.here();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "sym" => {
                p.advance();
                let sym = p.sym_decl()?;
                if sym_inputs.iter().any(|s| s.name == sym.name) {
                    return Err(ParseError::syntax(
                        line,
                        col,
                        format!("symbolic input `{}` declared twice", sym.name),
                    ));
                }
                sym_inputs.push(sym);
            }
            Tok::Ident(kw) if kw == "proc" => {
                p.advance();
                let (rline, rcol) = p.here();
                let rank = p.int()?;
                if rank != processes.len() as i64 {
                    return Err(ParseError::syntax(
                        rline,
                        rcol,
                        format!(
                            "process ranks must be contiguous from 0: expected `proc {}`, found `proc {rank}`",
                            processes.len()
                        ),
                    ));
                }
                p.requests.clear();
                let body = p.block()?;
                processes.push(body);
            }
            other => {
                return Err(ParseError::syntax(
                    line,
                    col,
                    format!("expected `proc` or `sym`, found {other}"),
                ))
            }
        }
    }
    if processes.is_empty() {
        return Err(ParseError::syntax(1, 1, "a program needs at least one process".into()));
    }
    let n = processes.len() as i64;
    for &(rank, line, col) in &p.literal_ranks {
        if rank < 0 || rank >= n {
            return Err(ParseError::RankOutOfRange { rank, procs: n as usize, line, col });
        }
    }
    let syms: BTreeSet<String> = sym_inputs.iter().map(|s| s.name.clone()).collect();
    let processes = processes
        .into_iter()
        .map(|block| resolve_block(&block, &syms))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Program { processes, sym_inputs })
}

/// Rewrites `Var(x)` into `Sym(x)` for declared symbolic inputs.
fn resolve_block(block: &Block, syms: &BTreeSet<String>) -> Result<Block, ParseError> {
    let mut out = Vec::with_capacity(block.len());
    for stmt in block.iter() {
        out.push(match stmt {
            Stmt::VarDecl(name) | Stmt::Assign(name, _) if syms.contains(name) => {
                return Err(ParseError::Semantic(format!(
                    "`{name}` is a symbolic input and cannot be declared or assigned"
                )))
            }
            Stmt::VarDecl(_) => stmt.clone(),
            Stmt::Assign(name, e) => Stmt::Assign(name.clone(), resolve_expr(e, syms)),
            Stmt::If(c, t, e) => Stmt::If(resolve_expr(c, syms), resolve_block(t, syms)?, resolve_block(e, syms)?),
            Stmt::While(c, body) => Stmt::While(resolve_expr(c, syms), resolve_block(body, syms)?),
            Stmt::Comm(comm, label) => {
                let comm = match comm {
                    Comm::Ssend(e) => Comm::Ssend(resolve_expr(e, syms)),
                    Comm::Send(e) => Comm::Send(resolve_expr(e, syms)),
                    Comm::ISend(e, r) => Comm::ISend(resolve_expr(e, syms), r.clone()),
                    Comm::Recv(peer) => Comm::Recv(resolve_peer(peer, syms)),
                    Comm::IRecv(peer, r) => Comm::IRecv(resolve_peer(peer, syms), r.clone()),
                    Comm::Barrier | Comm::Wait(_) => comm.clone(),
                };
                Stmt::Comm(comm, label.clone())
            }
        });
    }
    Ok(Arc::from(out))
}

fn resolve_peer(peer: &Peer, syms: &BTreeSet<String>) -> Peer {
    match peer {
        Peer::Any => Peer::Any,
        Peer::Rank(e) => Peer::Rank(resolve_expr(e, syms)),
    }
}

fn resolve_expr(e: &Expr, syms: &BTreeSet<String>) -> Expr {
    match e {
        Expr::Var(name) if syms.contains(name) => Expr::Sym(name.clone()),
        Expr::Int(_) | Expr::Var(_) | Expr::Sym(_) => e.clone(),
        Expr::Bin(op, l, r) => Expr::bin(*op, resolve_expr(l, syms), resolve_expr(r, syms)),
        Expr::Not(inner) => Expr::not(resolve_expr(inner, syms)),
    }
}

const KEYWORDS: &[&str] = &[
    "proc", "sym", "var", "int", "in", "if", "else", "while", "send", "ssend", "recv", "isend",
    "irecv", "wait", "barrier",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &str) -> ParseError {
        let (line, col) = self.here();
        ParseError::syntax(line, col, format!("expected {expected}, found {}", self.peek()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(&tok.to_string()))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(w) if w == kw => {
                self.advance();
                Ok(())
            }
            _ => Err(self.error_here(&format!("`{kw}`"))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                self.advance();
                Ok(w)
            }
            _ => Err(self.error_here("an identifier")),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(if neg { -n } else { n })
            }
            _ => Err(self.error_here("an integer")),
        }
    }

    fn sym_decl(&mut self) -> Result<SymInput, ParseError> {
        let name = self.ident()?;
        if *self.peek() == Tok::Colon {
            self.advance();
            self.keyword("int")?;
        }
        let (mut low, mut high) = DEFAULT_DOMAIN;
        if self.is_keyword("in") {
            self.advance();
            let (line, col) = self.here();
            self.expect(Tok::LBracket)?;
            low = self.int()?;
            self.expect(Tok::Comma)?;
            high = self.int()?;
            self.expect(Tok::RBracket)?;
            if low > high {
                return Err(ParseError::syntax(line, col, format!("empty domain [{low}, {high}]")));
            }
        }
        self.expect(Tok::Semi)?;
        Ok(SymInput { name, low, high })
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(Arc::from(stmts))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let (line, col) = self.here();
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            _ => return Err(self.error_here("a statement")),
        };
        match word.as_str() {
            "var" => {
                self.advance();
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                self.keyword("int")?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::VarDecl(name))
            }
            "if" => {
                self.advance();
                let cond = self.condition()?;
                let then = self.block()?;
                let els = if self.is_keyword("else") {
                    self.advance();
                    if self.is_keyword("if") {
                        let nested = self.stmt()?;
                        Arc::from(vec![nested])
                    } else {
                        self.block()?
                    }
                } else {
                    Arc::from(Vec::new())
                };
                Ok(Stmt::If(cond, then, els))
            }
            "while" => {
                self.advance();
                let cond = self.condition()?;
                let body = self.block()?;
                Ok(Stmt::While(cond, body))
            }
            "send" | "ssend" | "recv" | "isend" | "irecv" | "wait" | "barrier" => {
                let comm = self.comm()?;
                let label = if *self.peek() == Tok::At {
                    self.advance();
                    Some(self.ident()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt::Comm(comm, label))
            }
            _ if !KEYWORDS.contains(&word.as_str()) => {
                self.advance();
                self.expect(Tok::Assign)?;
                let value = self.typed_expr(Ty::Int)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Assign(word, value))
            }
            _ => Err(ParseError::syntax(line, col, format!("unexpected keyword `{word}`"))),
        }
    }

    fn condition(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen)?;
        let e = self.typed_expr(Ty::Bool)?;
        self.expect(Tok::RParen)?;
        Ok(e)
    }

    fn comm(&mut self) -> Result<Comm, ParseError> {
        let word = match self.advance() {
            Tok::Ident(w) => w,
            _ => unreachable!("comm called on non-identifier"),
        };
        if word == "barrier" {
            return Ok(Comm::Barrier);
        }
        self.expect(Tok::LParen)?;
        let comm = match word.as_str() {
            "send" => Comm::Send(self.rank_expr()?),
            "ssend" => Comm::Ssend(self.rank_expr()?),
            "recv" => Comm::Recv(self.peer()?),
            "isend" => {
                let dst = self.rank_expr()?;
                self.expect(Tok::Comma)?;
                let req = self.ident()?;
                self.requests.insert(req.clone());
                Comm::ISend(dst, req)
            }
            "irecv" => {
                let src = self.peer()?;
                self.expect(Tok::Comma)?;
                let req = self.ident()?;
                self.requests.insert(req.clone());
                Comm::IRecv(src, req)
            }
            "wait" => {
                let (line, col) = self.here();
                let req = self.ident()?;
                if !self.requests.contains(&req) {
                    return Err(ParseError::UndeclaredRequest { name: req, line, col });
                }
                Comm::Wait(req)
            }
            _ => unreachable!(),
        };
        self.expect(Tok::RParen)?;
        Ok(comm)
    }

    fn peer(&mut self) -> Result<Peer, ParseError> {
        if *self.peek() == Tok::Star {
            self.advance();
            Ok(Peer::Any)
        } else {
            Ok(Peer::Rank(self.rank_expr()?))
        }
    }

    fn rank_expr(&mut self) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        let e = self.typed_expr(Ty::Int)?;
        if let Expr::Int(n) = e {
            self.literal_ranks.push((n, line, col));
        }
        Ok(e)
    }

    fn typed_expr(&mut self, want: Ty) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        let (e, ty) = self.or_expr()?;
        if ty != want {
            return Err(ParseError::Type { expected: want.to_string(), found: ty.to_string(), line, col });
        }
        Ok(e)
    }

    fn or_expr(&mut self) -> Result<(Expr, Ty), ParseError> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            let (line, col) = self.here();
            self.advance();
            let rhs = self.and_expr()?;
            lhs = (self.combine(BinOp::Or, lhs, rhs, line, col)?, Ty::Bool);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<(Expr, Ty), ParseError> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::AndAnd {
            let (line, col) = self.here();
            self.advance();
            let rhs = self.cmp_expr()?;
            lhs = (self.combine(BinOp::And, lhs, rhs, line, col)?, Ty::Bool);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<(Expr, Ty), ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let (line, col) = self.here();
        self.advance();
        let rhs = self.add_expr()?;
        Ok((self.combine(op, lhs, rhs, line, col)?, Ty::Bool))
    }

    fn add_expr(&mut self) -> Result<(Expr, Ty), ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (line, col) = self.here();
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = (self.combine(op, lhs, rhs, line, col)?, Ty::Int);
        }
    }

    fn mul_expr(&mut self) -> Result<(Expr, Ty), ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            let (line, col) = self.here();
            self.advance();
            let rhs = self.unary()?;
            lhs = (self.combine(BinOp::Mul, lhs, rhs, line, col)?, Ty::Int);
        }
        Ok(lhs)
    }

    fn combine(
        &self,
        op: BinOp,
        (l, lt): (Expr, Ty),
        (r, rt): (Expr, Ty),
        line: usize,
        col: usize,
    ) -> Result<Expr, ParseError> {
        let operand = if op.is_logical() { Ty::Bool } else { Ty::Int };
        for ty in [lt, rt] {
            if ty != operand {
                return Err(ParseError::Type {
                    expected: operand.to_string(),
                    found: ty.to_string(),
                    line,
                    col,
                });
            }
        }
        Ok(Expr::bin(op, l, r))
    }

    fn unary(&mut self) -> Result<(Expr, Ty), ParseError> {
        let (line, col) = self.here();
        match self.peek() {
            Tok::Bang => {
                self.advance();
                let (e, ty) = self.unary()?;
                if ty != Ty::Bool {
                    return Err(ParseError::Type { expected: "bool".into(), found: ty.to_string(), line, col });
                }
                Ok((Expr::not(e), Ty::Bool))
            }
            Tok::Minus => {
                self.advance();
                if let Tok::Int(n) = *self.peek() {
                    self.advance();
                    return Ok((Expr::Int(-n), Ty::Int));
                }
                let (e, ty) = self.unary()?;
                if ty != Ty::Int {
                    return Err(ParseError::Type { expected: "int".into(), found: ty.to_string(), line, col });
                }
                Ok((Expr::bin(BinOp::Sub, Expr::Int(0), e), Ty::Int))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<(Expr, Ty), ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok((Expr::Int(n), Ty::Int))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.or_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(_) => Ok((Expr::Var(self.ident()?), Ty::Int)),
            _ => Err(self.error_here("an expression")),
        }
    }
}
