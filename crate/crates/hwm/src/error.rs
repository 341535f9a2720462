use thiserror::Error;

#[derive(Debug, Error)]
pub enum HwmError {
    #[error("layout constraint unsatisfied after {attempts} attempts (seed {seed}); retriable")]
    LayoutConstraintUnsatisfied { seed: u64, attempts: usize },
    #[error("numeric core: {0}")]
    Nd(#[from] ndcompute::NdError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("file format: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint lineage mismatch: {0}")]
    Lineage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("training aborted: {0}")]
    Training(String),
}

pub type Result<T> = std::result::Result<T, HwmError>;
