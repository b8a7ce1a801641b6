//! Satisfiability toolkit for monodic first-order temporal logic over
//! discrete linear time.
//!
//! The pipeline: parse a formula or problem ([`parser`]), normalise it into a
//! divided separated normal form problem ([`dsnf`]), then decide it either by
//! clausal temporal resolution ([`prover`]) or by the behaviour-graph
//! procedure ([`graph`]). Side conditions of every rule are discharged by a
//! decision procedure for monadic first-order sentences ([`oracle`]), and
//! finite ultimately-periodic models ([`model`]) provide a semantics-level
//! cross-check.

pub mod clauses;
pub mod dsnf;
pub mod error;
pub mod graph;
pub mod loopsearch;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod problem;
pub mod prover;
pub mod syntax;
pub mod testsupport;

pub use error::{CoreError, Result};
pub use problem::{EventualityClause, Semantics, StepClause, TemporalProblem};
pub use syntax::{classify, nnf, Formula, FormulaClass, Name, Signature, Term};
