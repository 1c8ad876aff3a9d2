use std::io;

/// Every failure the toolkit reports. Variant names double as the stable,
/// machine-readable error kinds used by the CLI and the C interface.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("duplicate visit {0}")]
    DuplicateVisit(String),
    #[error("no latent vector for visit {0}")]
    MissingLatent(String),
    #[error("invalid latent vector: {0}")]
    InvalidLatent(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training diverged at step {step}: {what} is not finite")]
    DivergenceDetected { step: usize, what: &'static str },
    #[error("covariance is not positive semi-definite (eigenvalue {0:e})")]
    NonPsdCovariance(f64),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("loss became non-finite at step {0}")]
    NonFiniteLoss(usize),
    #[error("vector has zero norm")]
    ZeroNormVector,
    #[error("requested {requested} neighbours but only {available} are available")]
    NotEnoughNeighbors { requested: usize, available: usize },
    #[error("neighbour set is empty")]
    EmptyNeighborSet,
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(i64),
    #[error("invalid grade {0}, expected 0..=4")]
    InvalidGrade(i64),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("no follow-up visits")]
    EmptyFollowups,
    #[error("all labels belong to a single class")]
    DegenerateLabels,
    #[error("cohort contains a single class")]
    SingleClass,
    #[error("at least 100 redraws are required, got {0}")]
    TooFewRedraws(usize),
    #[error("metric undefined on {invalid} of {attempts} resamples")]
    MetricUndefined { invalid: usize, attempts: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate marginals: expected agreement is 1")]
    DegenerateMarginals,
    #[error("at least 2 raters are required, got {0}")]
    TooFewRaters(usize),
    #[error("at least 2 items are required, got {0}")]
    TooFewItems(usize),
    #[error("gap {0} outside [1, 10]")]
    GapOutOfRange(f64),
    #[error("invalid fraction {0}, expected [0, 1]")]
    InvalidFraction(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DuplicateVisit(_) => "DuplicateVisit",
            Error::MissingLatent(_) => "MissingLatent",
            Error::InvalidLatent(_) => "InvalidLatent",
            Error::EmptyBatch => "EmptyBatch",
            Error::InsufficientData(_) => "InsufficientData",
            Error::DivergenceDetected { .. } => "DivergenceDetected",
            Error::NonPsdCovariance(_) => "NonPSDCovariance",
            Error::InvalidCount(_) => "InvalidCount",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFiniteLoss(_) => "NonFiniteLoss",
            Error::ZeroNormVector => "ZeroNormVector",
            Error::NotEnoughNeighbors { .. } => "NotEnoughNeighbors",
            Error::EmptyNeighborSet => "EmptyNeighborSet",
            Error::NonPositiveHorizon(_) => "NonPositiveHorizon",
            Error::InvalidGrade(_) => "InvalidGrade",
            Error::InvalidProbability(_) => "InvalidProbability",
            Error::EmptyFollowups => "EmptyFollowups",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::SingleClass => "SingleClass",
            Error::TooFewRedraws(_) => "TooFewRedraws",
            Error::MetricUndefined { .. } => "MetricUndefined",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::DegenerateMarginals => "DegenerateMarginals",
            Error::TooFewRaters(_) => "TooFewRaters",
            Error::TooFewItems(_) => "TooFewItems",
            Error::GapOutOfRange(_) => "GapOutOfRange",
            Error::InvalidFraction(_) => "InvalidFraction",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Format { .. } => "Format",
            Error::Io(_) => "Io",
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
