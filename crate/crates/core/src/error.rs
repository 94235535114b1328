use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("resolution {0} too small (need at least 4 nodes per axis)")]
    ResolutionTooSmall(usize),

    #[error("field not finite: {0}")]
    FieldNotFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("blow-up detected at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge within {iterations} iterations (best gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("hypothesis gcondition not verified, proceeding refused")]
    HypothesisNotVerified,

    #[error("bracket failure: mu(lo) = {mu_lo:e}, mu(hi) = {mu_hi:e}")]
    BracketFailure { mu_lo: f64, mu_hi: f64 },

    #[error("empty support")]
    EmptySupport,

    #[error("slope saturation at y = {y} (q = {q})")]
    SlopeSaturation { y: f64, q: f64 },

    #[error("no classical wave found: {0}")]
    NoClassicalWave(String),

    #[error("nonzero mean {0:e}; condition requires zero-average forcing")]
    NonzeroMean(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
