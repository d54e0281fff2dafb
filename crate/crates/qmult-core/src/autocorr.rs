//! Autocorrelation coefficients gamma_r = lim E_{n<N} f(n+r) conj f(n),
//! their fast-converging series for digit-multiplicative sequences, and
//! the mean-square correlation density used as a pseudorandomness test.
//!
//! Two evaluation methods coexist on purpose: direct finite-N averaging
//! works for any sequence, while the q-adic series converges geometrically
//! but needs the multiplicative digit structure. Their agreement is one of
//! the acceptance checks.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::phase::unit;
use crate::seq::{AnySequence, QMultSeq, Sequence};
use crate::sum::{mean_complex, mean_f64, ComplexSum};
use crate::{Error, Result};

/// Largest q-adic block the exact general-r reduction will enumerate.
pub const MAX_BLOCK: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelationMethod {
    /// Plain averages over [0, N).
    FiniteN(u64),
    /// q-adic series truncated after this many levels.
    TruncatedSeries(u32),
}

/// gamma_r for r in [0, R), with a per-entry error estimate: the exact
/// geometric tail for the series method, the measured difference between
/// the two largest scales for the finite method.
#[derive(Clone, Debug)]
pub struct CorrelationSeries {
    pub method: CorrelationMethod,
    pub gamma: Vec<Complex64>,
    pub error_estimate: Vec<f64>,
}

/// E_{n<N} f(n+r) conj f(n) by direct summation.
pub fn gamma_finite<F: Sequence + ?Sized>(f: &F, r: u64, n: u64) -> Complex64 {
    mean_complex(0, n, |m| f.value(m + r) * f.value(m).conj())
}

/// Finite average plus the scale gap |gamma(N) - gamma(N/2)|, reported
/// as the measured (not certified) error of the finite method.
fn gamma_finite_with_gap<F: Sequence + ?Sized>(f: &F, r: u64, n: u64) -> (Complex64, f64) {
    if n < 2 {
        return (gamma_finite(f, r, n), 2.0);
    }
    let h = n / 2;
    let first = mean_complex(0, h, |m| f.value(m + r) * f.value(m).conj());
    let rest = mean_complex(h, n, |m| f.value(m + r) * f.value(m).conj());
    let full = (first * h as f64 + rest * (n - h) as f64) / n as f64;
    (full, (full - first).norm())
}

/// The r = 1 series: group n by the shape n = a q^l - 1 with digit
/// a >= 1 at level l, so that n + 1 = a q^l. The (l, a) class has
/// density q^-(l+1), and f(a q^l - 1) splits into the digit a-1 at
/// level l plus l trailing digits q-1. Truncating after `depth` levels
/// leaves classes of total mass q^-depth, each term of modulus one.
pub fn gamma_one_series(f: &QMultSeq, depth: u32) -> (Complex64, f64) {
    let q = f.q();
    let mut acc = ComplexSum::default();
    let mut trailing = crate::Phase::ZERO;
    let mut weight = 1.0 / q as f64;
    for l in 0..depth {
        for a in 1..q {
            let hi = f.phase_at(l, a);
            let lo = f.phase_at(l, a - 1).add(trailing);
            acc.add(unit(hi.add(lo.neg()).turns()) * weight);
        }
        trailing = trailing.add(f.phase_at(l, q - 1));
        weight /= q as f64;
    }
    (acc.value(), (q as f64).powi(-(depth as i32)))
}

/// gamma_r through the exact q-adic block reduction.
///
/// Split n = q^t y + x with q^t the least power exceeding r. For low
/// parts x < q^t - r the top digits cancel and the term is constant in
/// y; for the r wrapping values of x the carry bumps y by one, and the
/// y-average factors into gamma_1 of the level-t shift. Only that
/// gamma_1 is truncated, so the tail inherits its bound scaled by the
/// wrap fraction r/q^t.
pub fn gamma_series(f: &QMultSeq, r: u64, depth: u32) -> Result<(Complex64, f64)> {
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "series depth must be at least 1".into(),
        ));
    }
    if r == 0 {
        return Ok((Complex64::new(1.0, 0.0), 0.0));
    }
    let q = f.q() as u64;
    let mut t = 0u32;
    let mut block = 1u64;
    while block <= r {
        block = block
            .checked_mul(q)
            .filter(|&b| b <= MAX_BLOCK)
            .ok_or(Error::BudgetExceeded {
                needed: u64::MAX,
                budget: MAX_BLOCK,
            })?;
        t += 1;
    }
    let (g1, g1_tail) = gamma_one_series(&f.shift(t), depth);
    let mut low = ComplexSum::default();
    for x in 0..block - r {
        low.add(f.eval(x + r) * f.eval(x).conj());
    }
    let mut wrap = ComplexSum::default();
    for x in block - r..block {
        wrap.add(f.eval(x + r - block) * f.eval(x).conj());
    }
    let value = (low.value() + wrap.value() * g1) / block as f64;
    let tail = r as f64 / block as f64 * g1_tail;
    Ok((value, tail))
}

/// All gamma_r for r < count under one method. Work is parallel over r;
/// each entry's summation has a fixed reduction shape, so results do
/// not depend on the thread count.
pub fn correlation_series(
    f: &AnySequence,
    count: u64,
    method: CorrelationMethod,
) -> Result<CorrelationSeries> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "need at least one coefficient".into(),
        ));
    }
    let entries: Vec<(Complex64, f64)> = match method {
        CorrelationMethod::FiniteN(n) => {
            if n == 0 {
                return Err(Error::InvalidParameter("range must be non-empty".into()));
            }
            (0..count)
                .into_par_iter()
                .map(|r| gamma_finite_with_gap(f, r, n))
                .collect()
        }
        CorrelationMethod::TruncatedSeries(depth) => {
            let g = f.as_qmult()?;
            (0..count)
                .into_par_iter()
                .map(|r| gamma_series(g, r, depth))
                .collect::<Result<_>>()?
        }
    };
    let (gamma, error_estimate) = entries.into_iter().unzip();
    Ok(CorrelationSeries {
        method,
        gamma,
        error_estimate,
    })
}

/// Mean-square correlation density E_{r<R} |gamma_r|^2, with a ladder of
/// partial densities at powers of q for decay-rate inspection. A value
/// staying near 1 flags rigid structure; decay toward 0 is the
/// pseudorandomness signature.
pub fn bertrandias_density(
    f: &AnySequence,
    count: u64,
    method: CorrelationMethod,
) -> Result<(f64, Vec<(u64, f64)>)> {
    let series = correlation_series(f, count, method)?;
    let sq: Vec<f64> = series.gamma.iter().map(|g| g.norm_sqr()).collect();
    let q = f.as_qmult().map(|g| g.q() as u64).unwrap_or(2);
    let mut points = Vec::new();
    let mut p = q;
    while p < count {
        points.push(p);
        p = match p.checked_mul(q) {
            Some(next) => next,
            None => break,
        };
    }
    points.push(count);
    let ladder: Vec<(u64, f64)> = points
        .into_iter()
        .map(|rr| (rr, mean_f64(0, rr, |i| sq[i as usize])))
        .collect();
    Ok((ladder.last().unwrap().1, ladder))
}

/// Least-squares decay exponent c in density ~ R^-c from a ladder.
/// Zero densities are skipped; fewer than two usable points give None.
pub fn decay_exponent(ladder: &[(u64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ladder
        .iter()
        .filter(|&&(_, d)| d > 0.0)
        .map(|&(r, d)| ((r as f64).ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-(sxy / sxx))
}
