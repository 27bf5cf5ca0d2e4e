//! Symbolic values, path conditions and a bounded-domain satisfiability checker.
//!
//! Satisfiability and implication are decided by exhaustive enumeration of the
//! cross-product of the declared input domains, guarded by an assignment cap.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lang::{BinOp, Expr};

/// Input name to inclusive `[lo, hi]` domain.
pub type Domains = BTreeMap<String, (i64, i64)>;

/// A concrete input assignment.
pub type Assignment = BTreeMap<String, i64>;

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("no domain declared for symbolic input `{0}`")]
    MissingDomain(String),
    #[error("enumeration of {size} assignments exceeds the cap of {cap}")]
    TooLarge { size: u128, cap: u64 },
}

/// A variable's value during symbolic execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymValue {
    Concrete(i64),
    Symbolic(Expr),
}

impl SymValue {
    pub fn into_expr(self) -> Expr {
        match self {
            SymValue::Concrete(c) => Expr::Int(c),
            SymValue::Symbolic(e) => e,
        }
    }

    pub fn as_concrete(&self) -> Option<i64> {
        match self {
            SymValue::Concrete(c) => Some(*c),
            SymValue::Symbolic(Expr::Int(c)) => Some(*c),
            SymValue::Symbolic(_) => None,
        }
    }
}

pub fn apply_op(op: BinOp, a: i64, b: i64) -> i64 {
    match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Eq => (a == b) as i64,
        BinOp::Ne => (a != b) as i64,
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
        BinOp::Gt => (a > b) as i64,
        BinOp::Ge => (a >= b) as i64,
        BinOp::And => (a != 0 && b != 0) as i64,
        BinOp::Or => (a != 0 || b != 0) as i64,
    }
}

/// Evaluates `expr` under `env`, folding constants where all leaves are concrete.
///
/// Both `Var` and `Sym` leaves are looked up in `env`; symbolic inputs are bound
/// to `Symbolic(Sym(name))` during symbolic execution and to concrete values on replay.
pub fn eval_expr<F>(expr: &Expr, env: &F) -> Result<SymValue, ConstraintError>
where
    F: Fn(&str) -> Option<SymValue>,
{
    match expr {
        Expr::Int(n) => Ok(SymValue::Concrete(*n)),
        Expr::Var(name) | Expr::Sym(name) => {
            let v = env(name).ok_or_else(|| ConstraintError::Unbound(name.clone()))?;
            Ok(match v {
                SymValue::Symbolic(Expr::Int(c)) => SymValue::Concrete(c),
                v => v,
            })
        }
        Expr::Not(inner) => Ok(match eval_expr(inner, env)? {
            SymValue::Concrete(c) => SymValue::Concrete((c == 0) as i64),
            SymValue::Symbolic(e) => SymValue::Symbolic(Expr::not(e)),
        }),
        Expr::Bin(op, l, r) => {
            let lv = eval_expr(l, env)?;
            let rv = eval_expr(r, env)?;
            Ok(fold(*op, lv, rv))
        }
    }
}

fn fold(op: BinOp, lv: SymValue, rv: SymValue) -> SymValue {
    use SymValue::*;
    match (op, &lv, &rv) {
        (_, Concrete(a), Concrete(b)) => Concrete(apply_op(op, *a, *b)),
        (BinOp::Mul, Concrete(0), _) | (BinOp::Mul, _, Concrete(0)) => Concrete(0),
        (BinOp::And, Concrete(0), _) | (BinOp::And, _, Concrete(0)) => Concrete(0),
        (BinOp::Or, Concrete(a), _) | (BinOp::Or, _, Concrete(a)) if *a != 0 => Concrete(1),
        (BinOp::And, Concrete(_), _) | (BinOp::Or, Concrete(_), _) => rv,
        (BinOp::And, _, Concrete(_)) | (BinOp::Or, _, Concrete(_)) => lv,
        _ => Symbolic(Expr::bin(op, lv.into_expr(), rv.into_expr())),
    }
}

/// Evaluates a fully-instantiated expression. `Var` leaves are rejected.
pub fn eval_concrete(expr: &Expr, assignment: &Assignment) -> Result<i64, ConstraintError> {
    match expr {
        Expr::Int(n) => Ok(*n),
        Expr::Sym(name) => assignment
            .get(name)
            .copied()
            .ok_or_else(|| ConstraintError::MissingDomain(name.clone())),
        Expr::Var(name) => Err(ConstraintError::Unbound(name.clone())),
        Expr::Not(e) => Ok((eval_concrete(e, assignment)? == 0) as i64),
        Expr::Bin(op, l, r) => {
            let a = eval_concrete(l, assignment)?;
            // short-circuit keeps evaluation total on partially relevant conjuncts
            match (op, a) {
                (BinOp::And, 0) => return Ok(0),
                (BinOp::Or, a) if a != 0 => return Ok(1),
                _ => {}
            }
            let b = eval_concrete(r, assignment)?;
            Ok(apply_op(*op, a, b))
        }
    }
}

/// A conjunction of boolean constraints over symbolic inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathCondition {
    pub conjuncts: Vec<Expr>,
}

impl PathCondition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_conjuncts(conjuncts: Vec<Expr>) -> Self {
        PathCondition { conjuncts }
    }

    pub fn push(&mut self, e: Expr) {
        self.conjuncts.push(e);
    }

    pub fn with(&self, e: Expr) -> Self {
        let mut pc = self.clone();
        pc.push(e);
        pc
    }

    pub fn and(&self, other: &PathCondition) -> Self {
        let mut pc = self.clone();
        pc.conjuncts.extend(other.conjuncts.iter().cloned());
        pc
    }

    pub fn is_trivial(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.conjuncts {
            c.sym_vars(&mut out);
        }
        out.sort();
        out
    }

    pub fn holds(&self, assignment: &Assignment) -> Result<bool, ConstraintError> {
        for c in &self.conjuncts {
            if eval_concrete(c, assignment)? == 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl std::fmt::Display for PathCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.conjuncts.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Exhaustive-enumeration decision procedure over bounded integer domains.
#[derive(Debug, Clone)]
pub struct Solver {
    pub domains: Domains,
    pub cap: u64,
}

impl Solver {
    pub fn new(domains: Domains) -> Self {
        Solver { domains, cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    fn ranges(&self, vars: &[String]) -> Result<Vec<(String, i64, i64)>, ConstraintError> {
        let mut size: u128 = 1;
        let mut out = Vec::with_capacity(vars.len());
        for v in vars {
            let &(lo, hi) = self
                .domains
                .get(v)
                .ok_or_else(|| ConstraintError::MissingDomain(v.clone()))?;
            size = size.saturating_mul((hi - lo + 1).max(0) as u128);
            out.push((v.clone(), lo, hi));
        }
        if size > self.cap as u128 {
            return Err(ConstraintError::TooLarge { size, cap: self.cap });
        }
        Ok(out)
    }

    /// Visits assignments in lexicographic order until `visit` returns `true`.
    fn search<F>(&self, vars: &[String], mut visit: F) -> Result<Option<Assignment>, ConstraintError>
    where
        F: FnMut(&Assignment) -> Result<bool, ConstraintError>,
    {
        let ranges = self.ranges(vars)?;
        if ranges.iter().any(|&(_, lo, hi)| lo > hi) {
            return Ok(None);
        }
        let mut current: Assignment = ranges.iter().map(|(n, lo, _)| (n.clone(), *lo)).collect();
        loop {
            if visit(&current)? {
                return Ok(Some(current));
            }
            // odometer increment, last variable fastest
            let mut advanced = false;
            for (name, lo, hi) in ranges.iter().rev() {
                let slot = current.get_mut(name).expect("range var present");
                if *slot < *hi {
                    *slot += 1;
                    advanced = true;
                    break;
                }
                *slot = *lo;
            }
            if !advanced {
                return Ok(None);
            }
        }
    }

    /// A satisfying assignment of `pc`, if any.
    pub fn model(&self, pc: &PathCondition) -> Result<Option<Assignment>, ConstraintError> {
        let vars = pc.vars();
        self.search(&vars, |a| pc.holds(a))
    }

    pub fn is_sat(&self, pc: &PathCondition) -> Result<bool, ConstraintError> {
        Ok(self.model(pc)?.is_some())
    }

    /// `a ⇒ b`: no assignment satisfies `a` while falsifying some conjunct of `b`.
    pub fn implies(&self, a: &PathCondition, b: &PathCondition) -> Result<bool, ConstraintError> {
        let mut vars = a.vars();
        for v in b.vars() {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort();
        let witness = self.search(&vars, |asg| Ok(a.holds(asg)? && !b.holds(asg)?))?;
        Ok(witness.is_none())
    }

    /// A full assignment of every declared input satisfying `pc` (unconstrained inputs take their lower bound).
    pub fn full_model(&self, pc: &PathCondition) -> Result<Option<Assignment>, ConstraintError> {
        let Some(mut partial) = self.model(pc)? else {
            return Ok(None);
        };
        for (name, (lo, _)) in &self.domains {
            partial.entry(name.clone()).or_insert(*lo);
        }
        Ok(Some(partial))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::Sym("x".into())
    }

    fn dom(entries: &[(&str, i64, i64)]) -> Domains {
        entries.iter().map(|(n, lo, hi)| (n.to_string(), (*lo, *hi))).collect()
    }

    fn env_sym(name: &str) -> Option<SymValue> {
        Some(SymValue::Symbolic(Expr::Sym(name.to_string())))
    }

    #[test]
    fn eval_examples() {
        let none = |_: &str| None;
        assert_eq!(
            eval_expr(&Expr::bin(BinOp::Add, Expr::Int(2), Expr::Int(3)), &none).unwrap(),
            SymValue::Concrete(5)
        );
        let ne = Expr::bin(BinOp::Ne, x(), Expr::Int(97));
        assert_eq!(eval_expr(&ne, &env_sym).unwrap(), SymValue::Symbolic(ne.clone()));
        assert_eq!(
            eval_expr(&Expr::bin(BinOp::Mul, x(), Expr::Int(0)), &env_sym).unwrap(),
            SymValue::Concrete(0)
        );
        assert_eq!(
            eval_expr(&Expr::Var("q".into()), &none),
            Err(ConstraintError::Unbound("q".into()))
        );
    }

    #[test]
    fn concrete_and_literal_symbolic_agree() {
        let e = Expr::bin(BinOp::Add, Expr::Var("a".into()), Expr::Int(1));
        let c = eval_expr(&e, &|_: &str| Some(SymValue::Concrete(4))).unwrap();
        let s = eval_expr(&e, &|_: &str| Some(SymValue::Symbolic(Expr::Int(4)))).unwrap();
        assert_eq!(c, s);
        assert_eq!(c, SymValue::Concrete(5));
    }

    #[test]
    fn sat_examples() {
        let s = Solver::new(dom(&[("x", 0, 255)]));
        let eq = Expr::bin(BinOp::Eq, x(), Expr::Int(97));
        let ne = Expr::bin(BinOp::Ne, x(), Expr::Int(97));
        assert!(s.is_sat(&PathCondition::from_conjuncts(vec![eq.clone()])).unwrap());
        assert!(!s.is_sat(&PathCondition::from_conjuncts(vec![eq, ne])).unwrap());

        let s10 = Solver::new(dom(&[("x", 0, 10)]));
        let gt5 = Expr::bin(BinOp::Gt, x(), Expr::Int(5));
        let lt5 = Expr::bin(BinOp::Lt, x(), Expr::Int(5));
        assert!(!s10.is_sat(&PathCondition::from_conjuncts(vec![gt5, lt5])).unwrap());
    }

    #[test]
    fn implies_examples() {
        let s = Solver::new(dom(&[("x", 0, 255), ("y", 0, 3)]));
        let eq = PathCondition::from_conjuncts(vec![Expr::bin(BinOp::Eq, x(), Expr::Int(97))]);
        assert!(s.implies(&eq, &eq).unwrap());
        let stronger = eq.with(Expr::bin(BinOp::Gt, Expr::Sym("y".into()), Expr::Int(0)));
        assert!(s.implies(&stronger, &eq).unwrap());
        assert!(!s.implies(&eq, &stronger).unwrap());

        let s10 = Solver::new(dom(&[("x", 0, 10)]));
        let gt5 = PathCondition::from_conjuncts(vec![Expr::bin(BinOp::Gt, x(), Expr::Int(5))]);
        let gt3 = PathCondition::from_conjuncts(vec![Expr::bin(BinOp::Gt, x(), Expr::Int(3))]);
        assert!(s10.implies(&gt5, &gt3).unwrap());
        assert!(!s10.implies(&gt3, &gt5).unwrap());
        // everything implies the empty condition
        assert!(s10.implies(&gt3, &PathCondition::new()).unwrap());
    }

    #[test]
    fn missing_domain_and_cap() {
        let s = Solver::new(Domains::new());
        let pc = PathCondition::from_conjuncts(vec![Expr::bin(BinOp::Eq, x(), Expr::Int(1))]);
        assert_eq!(s.is_sat(&pc), Err(ConstraintError::MissingDomain("x".into())));

        let s = Solver::new(dom(&[("x", 0, 999), ("y", 0, 999), ("z", 0, 9)])).with_cap(1_000_000);
        let pc = PathCondition::from_conjuncts(vec![Expr::bin(
            BinOp::Eq,
            Expr::bin(BinOp::Add, x(), Expr::Sym("y".into())),
            Expr::Sym("z".into()),
        )]);
        assert!(matches!(s.is_sat(&pc), Err(ConstraintError::TooLarge { .. })));
    }

    #[test]
    fn full_model_fills_unconstrained_inputs() {
        let s = Solver::new(dom(&[("x", 0, 255), ("y", 7, 9)]));
        let pc = PathCondition::from_conjuncts(vec![Expr::bin(BinOp::Eq, x(), Expr::Int(97))]);
        let m = s.full_model(&pc).unwrap().unwrap();
        assert_eq!(m.get("x"), Some(&97));
        assert_eq!(m.get("y"), Some(&7));
    }
}
