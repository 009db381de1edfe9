use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("schedule infeasible at n = {n}: {detail}")]
    ScheduleInfeasible { n: usize, detail: String },
    #[error("condition violated: {0}")]
    ConditionViolated(Box<crate::engine::Violation>),
    #[error("survivor set empty at n = {n}; {violation}")]
    SurvivorsEmpty {
        n: usize,
        violation: Box<crate::engine::Violation>,
    },
    #[error("branching absent at nu = {nu}: {detail}")]
    BranchingAbsent { nu: usize, detail: String },
    #[error("cube budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
