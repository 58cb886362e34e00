use alloc::string::String;

/// Errors raised by the benchmark engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid expression: {0}")]
    InvalidExpr(String),
    #[error("input {input:?} is outside the string alphabet (a-z)")]
    Domain { input: String },
    #[error("parse error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("count {count} is too small for the configured mix (minimum {minimum})")]
    CountTooSmall { count: usize, minimum: usize },
    #[error("fact table {table:?}: {msg}")]
    FactTable { table: String, msg: String },
    #[error("function {0:?} is not in the manifest")]
    UnknownFunction(String),
    #[error("session budget of {budget} queries exhausted")]
    BudgetExhausted { budget: usize },
    #[error("at most {limit} inputs per call, got {got}")]
    TooManyInputs { limit: usize, got: usize },
    #[error("empty input list")]
    EmptyQuery,
    #[error("function is undefined on the whole evaluation grid")]
    UndefinedOnGrid,
    #[error("only {found} defined sample points (need at least {needed})")]
    Unapproximable { found: usize, needed: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
