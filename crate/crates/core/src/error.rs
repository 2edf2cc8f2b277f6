use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} must be a probability in [0, 1], got {value}")]
    InvalidProbability { what: String, value: f64 },

    #[error("invalid task spec `{task}`: {reason}")]
    InvalidSpec { task: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle enumeration needs {count} permutations, limit is {limit}")]
    PermutationLimit { count: u128, limit: u128 },

    #[error("prefix reached milestone {reached} but continuation starts at milestone {stage}")]
    PrefixNotReached { stage: usize, reached: usize },

    #[error("prefix has no messages left")]
    BudgetExhausted,

    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("row {row}, column `{column}`: {reason}")]
    Table {
        row: usize,
        column: String,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(task: &str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            task: task.to_string(),
            reason: reason.into(),
        }
    }
}

/// Checks that `value` lies in `[0, 1]` (rejects NaN).
pub(crate) fn check_probability(what: impl FnOnce() -> String, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability {
            what: what(),
            value,
        })
    }
}
