use thiserror::Error;

/// Errors raised by the solvers and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precision cap of {cap_bits} bits reached, achieved defect {defect:e}")]
    PrecisionFailure { cap_bits: u32, defect: f64 },

    #[error("series truncation cannot be certified: tail bound {bound:e} exceeds tolerance {tolerance:e}")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("enumeration of {size} terms exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("more than one repeated value in constrained sum")]
    UnsupportedDegeneracy,

    #[error("step size underflow at t = {t:e} (h = {step:e})")]
    Stiffness { t: f64, step: f64 },

    #[error("resolvent evaluated at pole z = -{pole}")]
    Singularity { pole: u64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
