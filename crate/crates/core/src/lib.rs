//! Verification of message-passing programs by symbolic execution combined
//! with CSP model checking.

pub mod cli;
pub mod constraint;
pub mod csp;
pub mod engine;
pub mod gen;
pub mod lang;
pub mod semantics;
