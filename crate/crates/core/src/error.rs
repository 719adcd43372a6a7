use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("photon number {n} exceeds cutoff {cutoff}")]
    OutOfRange { n: usize, cutoff: usize },

    #[error("cutoff {cutoff} too small: tail mass {tail:.3e} at the top Fock level")]
    CutoffTooSmall { cutoff: usize, tail: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("state is not normalized (norm^2 = {norm_sqr:.12})")]
    NotNormalized { norm_sqr: f64 },

    #[error("invalid code specification: {0}")]
    InvalidSpec(String),

    #[error("binomial codewords have no primitive state")]
    UnsupportedPrimitive,

    #[error("degenerate code: {0}")]
    DegenerateCode(String),

    #[error("loss pipeline needs a power-of-two rotation order, got M = {0}")]
    UnsupportedOrder(usize),

    #[error("syndrome {q} out of range for {classes} classes")]
    SyndromeOutOfRange { q: usize, classes: usize },

    #[error("state carries no Kraus-branch bookkeeping")]
    MissingBookkeeping,

    #[error("Kraus expansion retained only {retained:.12} of the trace")]
    KrausCap { retained: f64 },

    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("no secret key anywhere on the search grid")]
    NoKey,

    #[error("target key rate {target:.3e} unreachable with up to {n_max} links")]
    Unreachable { target: f64, n_max: usize },

    #[error("target cost {target:.3e} is below the minimum achievable {minimum:.3e}")]
    BelowMinimum { target: f64, minimum: f64 },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("output: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
