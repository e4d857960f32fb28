use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbrtError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("leaf denominator H + lambda = {0} is not positive")]
    Denominator(f64),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GbrtError>;
