use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("fiber rank {0} exceeds the supported maximum of 4")]
    RankTooLarge(usize),
    #[error("metric determinant is structurally zero")]
    SingularMetric,
    #[error("section has nonzero components outside the {0} block")]
    WrongBlock(&'static str),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("grid of {points} points exceeds the budget of {budget}")]
    BudgetExceeded { points: u128, budget: u128 },
    #[error("invalid integration domain: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
