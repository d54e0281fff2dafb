//! Phases measured in turns and exact mod-1 arithmetic.
//!
//! A phase `x` stands for the unit complex number `e(x) = exp(2*pi*i*x)`.
//! Working in turns keeps the group law trivial: multiplying unit complex
//! numbers is adding phases mod 1. Where correlations against linear or
//! polynomial phases need `n * alpha mod 1` for large `n`, plain f64
//! multiplication loses the fractional part; [`FixedTurn`] does that
//! arithmetic exactly in 64-bit fixed point.

use num_complex::Complex64;

/// A phase in turns, normalized to `[0, 1)`.
#[derive(Copy, Clone, Debug, Default, PartialEq, PartialOrd)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    /// Wraps an arbitrary finite value into `[0, 1)`.
    pub fn new(turns: f64) -> Phase {
        assert!(turns.is_finite(), "phase must be finite");
        let mut x = turns.rem_euclid(1.0);
        // rem_euclid(1.0) of a tiny negative value rounds to 1.0 itself.
        if x >= 1.0 {
            x = 0.0;
        }
        Phase(x)
    }

    pub fn turns(self) -> f64 {
        self.0
    }

    /// Sum mod 1. Exact when both inputs are in `[0, 1)`: the only
    /// reduction is subtracting 1 from a value in `[1, 2)`, which is exact
    /// in IEEE arithmetic.
    pub fn add(self, other: Phase) -> Phase {
        let s = self.0 + other.0;
        Phase(if s >= 1.0 { s - 1.0 } else { s })
    }

    pub fn neg(self) -> Phase {
        if self.0 == 0.0 {
            Phase(0.0)
        } else {
            Phase(1.0 - self.0)
        }
    }

    /// `e(x)` as a complex number on the unit circle.
    pub fn to_complex(self) -> Complex64 {
        unit(self.0)
    }
}

/// `e(turns)` without the normalization guard of [`Phase`].
pub fn unit(turns: f64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * turns).sin_cos();
    Complex64::new(c, s)
}

/// A turn value in 64-bit fixed point: `x = raw / 2^64`.
///
/// Addition and multiplication by integers wrap, which is precisely
/// reduction mod 1, so polynomial phase evaluation is exact for the
/// quantized coefficients no matter how large the argument gets.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct FixedTurn(u64);

const TWO64: f64 = 18446744073709551616.0;

impl FixedTurn {
    pub const ZERO: FixedTurn = FixedTurn(0);

    pub fn from_turns(turns: f64) -> FixedTurn {
        assert!(turns.is_finite(), "turn value must be finite");
        let x = turns.rem_euclid(1.0);
        // x * 2^64 can round up to 2^64 exactly; that is 0 mod 1.
        let scaled = (x * TWO64).round();
        if scaled >= TWO64 {
            FixedTurn(0)
        } else {
            FixedTurn(scaled as u64)
        }
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn to_turns(self) -> f64 {
        self.0 as f64 / TWO64
    }

    pub fn add(self, other: FixedTurn) -> FixedTurn {
        FixedTurn(self.0.wrapping_add(other.0))
    }

    /// `k * x mod 1`, exact for any `k`.
    pub fn mul_u64(self, k: u64) -> FixedTurn {
        FixedTurn(self.0.wrapping_mul(k))
    }

    pub fn neg(self) -> FixedTurn {
        FixedTurn(self.0.wrapping_neg())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_normalizes_into_unit_interval() {
        assert_eq!(Phase::new(0.25).turns(), 0.25);
        assert_eq!(Phase::new(1.25).turns(), 0.25);
        assert_eq!(Phase::new(-0.25).turns(), 0.75);
        assert_eq!(Phase::new(3.0).turns(), 0.0);
        let tiny = Phase::new(-1e-20);
        assert!(tiny.turns() < 1.0);
    }

    #[test]
    fn phase_add_wraps() {
        let a = Phase::new(0.75);
        let b = Phase::new(0.75);
        assert_eq!(a.add(b).turns(), 0.5);
        assert_eq!(a.add(Phase::ZERO).turns(), 0.75);
        assert_eq!(a.add(a.neg()).turns(), 0.0);
    }

    #[test]
    fn unit_lies_on_circle() {
        for &x in &[0.0, 0.1, 0.25, 0.5, 0.999] {
            let z = unit(x);
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
        assert!((unit(0.5) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fixed_turn_multiplication_is_exact_mod_one() {
        // 3/8 is exactly representable; 5 * 3/8 = 15/8 = 7/8 mod 1.
        let x = FixedTurn::from_turns(0.375);
        assert_eq!(x.mul_u64(5).to_turns(), 0.875);
        // Wrapping at huge multipliers stays consistent: k * x mod 1
        // only depends on k mod 8 here.
        let k = (1u64 << 61) + 5;
        assert_eq!(x.mul_u64(k).to_turns(), x.mul_u64(k % 8).to_turns());
    }

    #[test]
    fn fixed_turn_roundtrip_close() {
        for &x in &[0.0, 0.1, 1.0 / 3.0, 0.618033988749895, 0.9999999] {
            assert!((FixedTurn::from_turns(x).to_turns() - x).abs() < 1e-18);
        }
    }
}
