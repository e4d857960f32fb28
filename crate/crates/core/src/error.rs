use thiserror::Error;

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected `timestamp,flow`, found `{0}`")]
    Header(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("out-of-order at line {line}")]
    OutOfOrder { line: u64 },
    #[error("duplicate timestamp at line {line}")]
    Duplicate { line: u64 },
    #[error("missing fraction {fraction:.4} exceeds limit {limit:.4}")]
    TooManyMissing { fraction: f64, limit: f64 },
    #[error("no donor value for gap at {0}")]
    NoDonor(String),
    #[error("interval error: {0}")]
    Interval(String),
    #[error("misaligned start {start}: not on a {minutes}-minute boundary")]
    Misaligned { start: String, minutes: i64 },
    #[error("split error: {0}")]
    Split(String),
    #[error("degenerate series: standard deviation {0:e} is too small")]
    Degenerate(f64),
    #[error("series too short: length {len} < required {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("series has {0} missing values; impute first")]
    HasMissing(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}
