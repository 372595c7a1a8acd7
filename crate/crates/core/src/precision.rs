//! Working-precision selection for the cancellation-prone solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DOUBLE_BITS: u32 = 53;
pub const DEFAULT_CAP_BITS: u32 = 16384;
pub const DEFAULT_TARGET_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionMode {
    /// Native `f64` arithmetic.
    FixedDouble,
    /// MPFR floats with a fixed mantissa width.
    FixedBits,
    /// Start at `mantissa_bits` and widen until the consistency canary passes.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPolicy {
    pub mode: PrecisionMode,
    pub mantissa_bits: u32,
    pub escalation_factor: f64,
    pub cap_bits: u32,
    /// Canary threshold used by `Auto`.
    pub target_tolerance: f64,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        Self::auto()
    }
}

impl PrecisionPolicy {
    pub fn fixed_double() -> Self {
        Self {
            mode: PrecisionMode::FixedDouble,
            mantissa_bits: DOUBLE_BITS,
            escalation_factor: 2.0,
            cap_bits: DEFAULT_CAP_BITS,
            target_tolerance: DEFAULT_TARGET_TOLERANCE,
        }
    }

    pub fn fixed_bits(bits: u32) -> Self {
        Self { mode: PrecisionMode::FixedBits, mantissa_bits: bits, ..Self::fixed_double() }
    }

    pub fn auto() -> Self {
        Self { mode: PrecisionMode::Auto, ..Self::fixed_double() }
    }

    pub fn with_cap(mut self, cap_bits: u32) -> Self {
        self.cap_bits = cap_bits;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.target_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mantissa_bits < 2 {
            return Err(Error::InvalidArgument("mantissa bits must be at least 2".into()));
        }
        if !(self.escalation_factor > 1.0) {
            return Err(Error::InvalidArgument("escalation factor must exceed 1".into()));
        }
        if self.cap_bits < self.mantissa_bits && self.mode == PrecisionMode::Auto {
            return Err(Error::InvalidArgument("precision cap below starting precision".into()));
        }
        if !(self.target_tolerance > 0.0) {
            return Err(Error::InvalidArgument("target tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Runs `attempt(bits)` at increasing widths until it reports a defect at
    /// or below the target. Fixed modes make exactly one attempt and never
    /// fail. Returns the accepted value, the bits used and the defect.
    pub fn escalate<T>(&self, mut attempt: impl FnMut(u32) -> (T, f64)) -> Result<(T, u32, f64)> {
        self.validate()?;
        let mut bits = match self.mode {
            PrecisionMode::FixedDouble => DOUBLE_BITS,
            _ => self.mantissa_bits,
        };
        loop {
            let (value, defect) = attempt(bits);
            if self.mode != PrecisionMode::Auto || defect <= self.target_tolerance {
                return Ok((value, bits, defect));
            }
            if bits >= self.cap_bits {
                return Err(Error::PrecisionFailure { cap_bits: self.cap_bits, defect });
            }
            let next = (bits as f64 * self.escalation_factor).ceil() as u32;
            bits = next.max(bits + 1).min(self.cap_bits);
        }
    }
}
