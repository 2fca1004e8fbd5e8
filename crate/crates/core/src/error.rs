use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuselError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {0} is constant and cannot be normalized")]
    ConstantColumn(usize),

    #[error("column {0} is entirely missing")]
    MissingColumn(usize),

    #[error("Gram matrix diagonal entry {index} is {value}, expected 1")]
    NonUnitDiagonal { index: usize, value: f64 },

    #[error("problem too large for this method: {0}")]
    TooLarge(String),

    #[error("enumeration budget exceeded: {needed} subproblems > cap {cap}; use a lower bound instead")]
    BudgetExceeded { needed: u128, cap: u128 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, MuselError>;
