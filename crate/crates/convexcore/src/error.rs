use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProgramError {
    #[error("variable index {index} referenced by {context} was never declared")]
    UndeclaredVariable { index: usize, context: String },
    #[error("variable {name} has invalid bounds [{lower}, {upper}]")]
    BadBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("bound override vector has length {got}, program has {expected} variables")]
    BoundsLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BnbError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("root relaxation is infeasible")]
    RootInfeasible,
    #[error("root relaxation is unbounded")]
    RootUnbounded,
    #[error("numerical failure in continuous solve: {0}")]
    Numerical(String),
    #[error("node limit {nodes} reached before any incumbent was found")]
    NodeLimitWithoutIncumbent { nodes: usize },
}
