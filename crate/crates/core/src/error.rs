use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("epsilon {epsilon} infeasible for dimension {dim} (epsilon * dim must be <= 1)")]
    InfeasibleEpsilon { epsilon: f64, dim: usize },

    #[error("partition scheme infeasible: {0}")]
    SchemeInfeasible(String),

    #[error("client {0} holds no samples")]
    EmptyClient(usize),

    #[error("group {0} has no samples")]
    MissingGroup(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("fold of size {fold_size} cannot cover {groups} groups")]
    InfeasibleFold { fold_size: usize, groups: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
