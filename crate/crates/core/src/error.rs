use thiserror::Error;

/// Everything that can go wrong while configuring or running the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing configuration key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{name}`: {reason}")]
    InvalidValue { name: String, reason: String },
    #[error("length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("pilot energy leaks off the sparse bin grid ({captured:.3e} of energy captured)")]
    SparsityViolation { captured: f64 },
    #[error("delay spread {delay} does not fit inside a cyclic prefix of {cp_len}")]
    InvalidSpread { delay: usize, cp_len: usize },
    #[error("backscatter path delay {delay} reaches the cyclic prefix length {cp_len}")]
    CpOverflow { delay: usize, cp_len: usize },
    #[error("{requested} devices requested but the delay plan supports at most {z_max}")]
    CapacityExceeded { requested: usize, z_max: usize },
    #[error("affine bin sets of devices {a} and {b} overlap")]
    OverlapDetected { a: usize, b: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("pilot bin {0} has no usable amplitude")]
    SingularPilot(usize),
    #[error("no propagation path exceeds the detection threshold")]
    NoPathDetected,
    #[error("expected {expected} peaks, found {found}")]
    TooFewPeaks { expected: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("existing output does not match the sweep: {0}")]
    ResumeMismatch(String),
    #[error("{failed} of {trials} trials failed at point {point_id}: {first}")]
    TooManyTrialErrors {
        point_id: usize,
        failed: usize,
        trials: usize,
        first: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
