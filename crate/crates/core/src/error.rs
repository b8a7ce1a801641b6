//! Error types shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("arity mismatch for {name}: declared {expected}, used with {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("symbol {0} used both as predicate and constant")]
    SymbolClash(String),

    #[error("unknown symbol {0}")]
    UnknownSymbol(String),

    #[error("formula is not monodic: {0}")]
    NotMonodic(String),

    #[error("predicate {pred} has arity {arity}; fragment unsupported without an external oracle")]
    UnsupportedFragment { pred: String, arity: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("oracle call budget exhausted")]
    OracleBudget,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
