use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("path enumeration would exceed the limit of {limit} paths")]
    PathLimit { limit: u64 },

    #[error("split produced an empty {side} set")]
    EmptySplit { side: &'static str },

    #[error("(I - Q) is singular; closed transient states without absorption: {}", states.join(", "))]
    Singular { states: Vec<String> },

    #[error("{measure} cannot be computed for a {model} model")]
    UnsupportedMeasure {
        measure: &'static str,
        model: &'static str,
    },

    #[error("degenerate labels: {positives} positives and {negatives} negatives")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
