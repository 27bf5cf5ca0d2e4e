//! Surface syntax of the message-passing language: AST, parser and printer.
//!
//! Programs are a list of `proc <rank> { ... }` blocks plus optional
//! `sym <name> : int in [lo, hi];` input declarations. See `docs/grammar.md`.

mod ast;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use parser::parse_program;

use thiserror::Error;

/// Domain given to a symbolic input declared without an explicit range.
pub const DEFAULT_DOMAIN: (i64, i64) = (0, 255);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: type error: expected {expected}, found {found}")]
    Type { expected: String, found: String, line: usize, col: usize },
    #[error("{line}:{col}: undeclared request handle `{name}`")]
    UndeclaredRequest { name: String, line: usize, col: usize },
    #[error("{line}:{col}: rank {rank} out of range for a {procs}-process program")]
    RankOutOfRange { rank: i64, procs: usize, line: usize, col: usize },
    #[error("{0}")]
    Semantic(String),
    #[error("unknown property keyword `{0}` (expected `deadlock_free` or `before <a> <b>`)")]
    UnknownKeyword(String),
    #[error("unknown event label `{0}`")]
    UnknownLabel(String),
    #[error("malformed property: {0}")]
    MalformedProperty(String),
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, msg: String) -> Self {
        ParseError::Syntax { line, col, msg }
    }
}

/// Parses a property file against the program whose labels it references.
pub fn parse_property(text: &str, program: &Program) -> Result<PropertySpec, ParseError> {
    let words: Vec<&str> = text
        .lines()
        .map(|l| l.split("//").next().unwrap_or("").split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .collect();
    let Some((&kw, args)) = words.split_first() else {
        return Err(ParseError::MalformedProperty("empty property".into()));
    };
    match kw {
        "deadlock_free" if args.is_empty() => Ok(PropertySpec::DeadlockFree),
        "deadlock_free" => Err(ParseError::MalformedProperty(
            "`deadlock_free` takes no arguments".into(),
        )),
        "before" => {
            let [first, second] = args else {
                return Err(ParseError::MalformedProperty(
                    "`before` takes exactly two labels".into(),
                ));
            };
            let labels = program.labels();
            for l in [first, second] {
                if !labels.iter().any(|x| x == l) {
                    return Err(ParseError::UnknownLabel(l.to_string()));
                }
            }
            Ok(PropertySpec::Before { first: first.to_string(), second: second.to_string() })
        }
        other => Err(ParseError::UnknownKeyword(other.to_string())),
    }
}
