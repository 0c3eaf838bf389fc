use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid user parameter `{field}`: {reason}")]
    InvalidUser { field: &'static str, reason: String },
    #[error("at least one user is required")]
    NoUsers,
    #[error("training occupies the whole block (T = {block_len}, T_t = {total_train_len})")]
    NoDataPhase {
        block_len: u32,
        total_train_len: u32,
    },
    #[error("jammer power must be finite and >= 0, got {0}")]
    InvalidBudget(f64),
    #[error("allocation entry {index} is {value}; entries must be finite and >= 0")]
    NegativeRatio { index: usize, value: f64 },
    #[error("allocation sums to {sum}, expected 1")]
    NotOnSimplex { sum: f64 },
    #[error("allocation has {got} training entries but the system has {expected} users")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("jammer budget is zero; every allocation is optimal")]
    ZeroBudget,
    #[error("objective does not depend on the allocation (all data powers are zero)")]
    FlatObjective,
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("oracle grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
