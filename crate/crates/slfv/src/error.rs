use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("ball of radius {r} has no usable stencil at cell width {h}")]
    EmptyKernel { r: f64, h: f64 },
    #[error("radius {r} violates the resolution contract (r/h = {ratio:.3} < {min})")]
    Resolution { r: f64, ratio: f64, min: f64 },
    #[error("empty test-function family")]
    EmptyFamily,
    #[error("value {value} at cell {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instability at t = {t}: value {value} left [-1e-6, 1 + 1e-6]")]
    Instability { t: f64, value: f64 },
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("event rate {0} exceeds the configured bound")]
    RateOverflow(f64),
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
    #[error("time grid mismatch: {0}")]
    TimeMismatch(String),
    #[error("no sign change of F on (0, 1)")]
    NoRoot,
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("event log truncated; last valid record is #{last_valid:?}")]
    TruncatedLog { last_valid: Option<u64> },
    #[error("event log belongs to config {found}, expected {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigIssue>),
    #[error("{kind} failed: {source}")]
    Experiment { kind: String, source: Box<Error> },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One problem found while parsing or validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub line: Option<usize>,
    pub reason: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.reason),
            None => write!(f, "{}: {}", self.key, self.reason),
        }
    }
}

fn format_config_errors(v: &[ConfigIssue]) -> String {
    let parts: Vec<String> = v.iter().map(|e| e.to_string()).collect();
    format!("invalid configuration: {}", parts.join("; "))
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
