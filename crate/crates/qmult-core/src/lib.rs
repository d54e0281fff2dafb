//! Construction and uniformity diagnostics for q-multiplicative and
//! digital sequences.
//!
//! The library builds unit-modulus sequences from small phase tables
//! ([`seq::QMultSeq`]) and measures how far they are from behaving like
//! noise: exponential-sum suprema and decay exponents ([`expsum`]),
//! Gowers box norms with a digit-level recursion that certifies its own
//! error ([`gowers`]), digit-pattern counts along arithmetic progressions
//! ([`patterns`]), and shift autocorrelations ([`autocorr`]).
//!
//! Everything here is deterministic: summation uses a fixed reduction
//! tree with compensated leaves, so results are byte-identical across
//! thread counts, and seeded constructions use a fixed generator.

pub mod autocorr;
pub mod expsum;
pub mod gowers;
pub mod patterns;
pub mod phase;
pub mod seq;
pub mod sum;

pub use phase::{unit, FixedTurn, Phase};
pub use seq::{AnySequence, DigitalSeq, QMultSeq, SeqSpec, Sequence, TailPolicy};

/// Default cap on enumerated tuples for the brute-force averages.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("work budget exceeded: needs {needed} tuples, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("sequence spec parse error: {0}")]
    SpecParse(String),
    #[error("numerical invariant violated: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// q^l as u64, rejecting anything past 2^62 so downstream index
/// arithmetic cannot overflow.
pub fn checked_pow(q: u32, l: u32) -> Result<u64> {
    let mut acc: u64 = 1;
    for _ in 0..l {
        acc = acc
            .checked_mul(q as u64)
            .filter(|&v| v <= (1 << 62))
            .ok_or_else(|| {
                Error::InvalidParameter(format!("{q}^{l} exceeds the 2^62 index range"))
            })?;
    }
    Ok(acc)
}
