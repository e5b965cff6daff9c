use thiserror::Error;

/// Errors raised by the simulation, coupling and analytic layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("the finite-window chain has {classes} recurrent classes (expected exactly one)")]
    DegenerateChain { classes: usize },

    #[error("state space of {states} configurations exceeds the dense-solve limit of {limit}")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("invalid rule set: {0}")]
    InvalidRuleSet(String),

    #[error("invalid model parameter `{field}`: {message}")]
    InvalidModel { field: String, message: String },

    #[error("non-degeneracy violated: {0}")]
    NonDegenerateViolated(String),

    #[error("no coupling event found within {limit} time units before time {anchor}")]
    CouplingUnreachable { anchor: f64, limit: f64 },

    #[error("ambiguity closure exceeded its budget of {budget} points")]
    ClosureBudgetExceeded { budget: usize },

    #[error("flow evaluation exceeded {nodes} recursion nodes")]
    HorizonExceeded { nodes: usize },

    #[error("dual-start mismatch at {context}: fills disagree ({left} vs {right})")]
    DualStartMismatch {
        context: String,
        left: String,
        right: String,
    },

    #[error("width assertion failed: {0}")]
    WidthViolation(String),

    #[error("subcriticality gate failed: growth parameter {m} is not below 1")]
    SubcriticalityGateFailed { m: f64 },

    #[error("degenerate rates: {0}")]
    DegenerateRates(String),

    #[error("growth parameter {m} is supercritical (must be < 1)")]
    SupercriticalInput { m: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
