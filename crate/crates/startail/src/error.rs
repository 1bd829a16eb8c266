use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The polar decomposition is undefined at the origin.
    #[error("point is at the origin (modulus {modulus:.3e} <= floor {floor:.3e}); polar decomposition undefined")]
    OriginPoint { modulus: f64, floor: f64 },

    /// No finite bisection bracket was found inside the configured lambda range.
    #[error("gauge bracketing failed: no lambda in [2^-60, 2^60] with {observed}; the metric violates the gauge hypothesis")]
    BracketFailure { observed: String },

    /// Two objects that must share a shape (window range, dimension) do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A model or estimator parameter is outside its declared range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested closed form is not available for this model variant.
    #[error("no closed form available: {0}")]
    NoClosedForm(String),

    /// A supplied function violated its declared contract on a sampled input.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A supplied function was nonzero below its declared support radius.
    #[error("support violation: f is nonzero at a window with max modulus {observed:.6} below declared r0 = {r0:.6}")]
    SupportViolation { observed: f64, r0: f64 },

    /// The threshold admits no exceedance in the sample.
    #[error("no exceedances above threshold {threshold:.6e} (sample of {n})")]
    NoExceedances { threshold: f64, n: usize },

    /// Not enough data for the requested estimator.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The Hill threshold order statistic is zero.
    #[error("non-positive threshold: order statistic X_(k+1) = 0")]
    NonPositiveThreshold,

    /// A configuration file or block failed to parse or validate.
    #[error("config error: {0}")]
    ConfigError(String),

    /// The named verification suite does not exist.
    #[error("unknown suite '{0}' (known: axioms, timechange, nuk, estimator_oracle)")]
    UnknownSuite(String),

    /// A CSV row failed to parse.
    #[error("parse error at row {row}: {message}")]
    ParseError { row: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
