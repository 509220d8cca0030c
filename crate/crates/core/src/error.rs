use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero slope")]
    ZeroSlope,

    #[error("equal slopes {0}: the two sets never cross")]
    EqualSlopes(f64),

    #[error("target slope must be positive, got {0}")]
    NonPositiveSlope(f64),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid truncation times t' = {t_minus}, t'' = {t_plus}")]
    InvalidInterval { t_minus: f64, t_plus: f64 },

    #[error("state index {index} out of range 1..={len}")]
    InvalidLabel { index: usize, len: usize },

    #[error("transition {from}->{to} connects the two sets; counterintuitive ordering is defined only within a set")]
    CrossSetLabel { from: usize, to: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("confluent hypergeometric evaluation did not converge: a = {a}, b = {b}, z = {z}")]
    KummerNonConvergence { a: String, b: String, z: String },

    #[error("channel {channel} has no coupling; use the uncoupled phase instead")]
    UncoupledChannel { channel: usize },

    #[error("Wronskian of the fundamental pair vanished ({0:e})")]
    DegenerateWronskian(f64),

    #[error("missing channel data for channel {0}")]
    MissingChannel(usize),

    #[error("decoupled gap vanishes: no interference oscillation")]
    NoInterference,

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },

    #[error("norm drift {drift:e} exceeds limit {limit:e}")]
    NormDrift { drift: f64, limit: f64 },

    #[error("singular value decomposition failed to converge")]
    SvdFailure,
}
