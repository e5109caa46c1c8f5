use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("scenario schema violation: {0}")]
    Schema(#[from] serde_json::Error),

    /// A configuration value broke one of its validation rules.
    #[error("invalid value for `{field}`: {rule}")]
    Invalid { field: String, rule: String },

    #[error("split constraint infeasible: {0}")]
    SplitInfeasible(String),

    /// A plan violated one of the budget or split-index constraints.
    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("target below bias floor: epsilon {epsilon} <= alpha {alpha}")]
    BelowBiasFloor { epsilon: f64, alpha: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            rule: rule.into(),
        }
    }
}
