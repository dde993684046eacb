use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("period window [{t1}, {t2}] outside horizon 1..={horizon}")]
    WindowOutOfRange { t1: usize, t2: usize, horizon: usize },
    #[error("infeasible acceptance vector: {0}")]
    Infeasible(String),
    #[error("count underflow for type {0}")]
    CountUnderflow(usize),
    #[error("enumeration needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("acceptance vector is not locally optimal at type {0}")]
    NotLocallyOptimal(usize),
    #[error("degenerate policy: {0}")]
    DegeneratePolicy(String),
    #[error("trace does not match arrival sequence: {0}")]
    InconsistentTrace(String),
    #[error("distribution mass drifted to {0}")]
    MassDrift(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
