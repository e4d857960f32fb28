use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] flowcast_core::DataError),
    #[error(transparent)]
    Nn(#[from] flowcast_nn::NnError),
    #[error(transparent)]
    Autodiff(#[from] flowcast_autodiff::AutodiffError),
    #[error(transparent)]
    Gbrt(#[from] flowcast_gbrt::GbrtError),
    #[error("non-finite training loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("non-finite validation loss {loss} at epoch {epoch}")]
    NonFiniteValidation { epoch: usize, loss: f64 },
    #[error("test span of {len} steps is shorter than T + T_p = {needed}")]
    ShortSpan { len: usize, needed: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
}

impl BenchError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.display().to_string(), source }
    }
}
