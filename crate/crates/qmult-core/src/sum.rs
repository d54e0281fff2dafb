//! Deterministic compensated summation.
//!
//! Every averaging routine in this crate reduces terms over a binary tree
//! whose shape depends only on the index range, with Neumaier-compensated
//! leaves of fixed size. Work may be split across rayon threads, but the
//! additions happen in the same order regardless of thread count, so
//! results are reproducible bit for bit.

use num_complex::Complex64;

/// Neumaier variant of Kahan summation.
#[derive(Copy, Clone, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated complex accumulator.
#[derive(Copy, Clone, Debug, Default)]
pub struct ComplexSum {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

const LEAF: u64 = 1 << 12;
const SERIAL_CUTOFF: u64 = 1 << 16;

/// Reduces `map(lo, hi)` leaves over the fixed midpoint tree of `[lo, hi)`.
///
/// The tree shape is a function of the range alone, and `rayon::join`
/// preserves operand order, so the reduction is independent of the number
/// of worker threads.
pub fn tree_reduce<T, M, C>(lo: u64, hi: u64, map: &M, combine: &C) -> T
where
    T: Send,
    M: Fn(u64, u64) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    debug_assert!(lo <= hi);
    if hi - lo <= LEAF {
        return map(lo, hi);
    }
    let mid = lo + (hi - lo) / 2;
    if hi - lo <= SERIAL_CUTOFF {
        let a = tree_reduce(lo, mid, map, combine);
        let b = tree_reduce(mid, hi, map, combine);
        combine(a, b)
    } else {
        let (a, b) = rayon::join(
            || tree_reduce(lo, mid, map, combine),
            || tree_reduce(mid, hi, map, combine),
        );
        combine(a, b)
    }
}

/// Mean of `term(n)` over `lo <= n < hi` with the deterministic tree.
pub fn mean_complex<F>(lo: u64, hi: u64, term: F) -> Complex64
where
    F: Fn(u64) -> Complex64 + Sync,
{
    assert!(lo < hi, "empty range has no mean");
    let total = tree_reduce(
        lo,
        hi,
        &|a, b| {
            let mut acc = ComplexSum::default();
            for n in a..b {
                acc.add(term(n));
            }
            acc.value()
        },
        &|a, b| a + b,
    );
    total / (hi - lo) as f64
}

/// Mean of `term(n)` over `lo <= n < hi` with the deterministic tree.
pub fn mean_f64<F>(lo: u64, hi: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    assert!(lo < hi, "empty range has no mean");
    let total = tree_reduce(
        lo,
        hi,
        &|a, b| {
            let mut acc = Neumaier::default();
            for n in a..b {
                acc.add(term(n));
            }
            acc.value()
        },
        &|a, b| a + b,
    );
    total / (hi - lo) as f64
}
