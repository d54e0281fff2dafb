//! Box norms of order s and the digit-level carry recursion.
//!
//! The order-s box average of a unit-modulus sequence f over [0, N) is
//!
//!   A(f, r, N) = E over tuples (n_0, ..., n_s) with every vertex sum
//!                n_0 + sum_{i in w} n_i in [0, N), of
//!                prod_w C^|w| f(n_0 + sum_{i in w} n_i + r_w),
//!
//! where w ranges over subsets of {1..s}, C is complex conjugation, and
//! r is a vector of small non-negative shifts indexed by w. With r = 0
//! the average is real and non-negative and its 2^s-th root is the box
//! norm on [0, N).
//!
//! Three independent evaluation routes are provided and cross-checked:
//! a filtered brute-force scan ([`gowers_norm_bruteforce`]), a pruned
//! enumeration ([`parallelepiped_average`]) with exact regroupings for
//! orders 2 and 3 ([`parallelepiped_average_folded`]), and a digit-level
//! route that splits every tuple at base-q position l. The split turns
//! the average into a weighted sum of shifted-sequence averages over a
//! shorter range ([`recursive_average`]), with weights given by the
//! joint distribution of low digits and carries ([`weight_map`]) and a
//! certified error constant ([`recursion_error_constant`]). Full boxes
//! (all coordinates ranging over [0, q^L) independently) admit an exact
//! carry-state dynamic program ([`box_average_exact`]).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::expsum::{golden_max, sup_linear_correlation, SupResult};
use crate::phase::{unit, Phase};
use crate::seq::{QMultSeq, Sequence};
use crate::sum::{mean_complex, mean_f64, tree_reduce, ComplexSum, Neumaier};
use crate::{checked_pow, Error, Result};

/// Largest supported order. The carry state space has (s+1)^(2^s)
/// corners, which is the practical ceiling at s = 4.
pub const MAX_ORDER: u32 = 4;

/// Default minimum block length for [`epsilon_ledger`].
pub const DEFAULT_MIN_BLOCK: u32 = 2;

fn validate_order(s: u32) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&s) {
        return Err(Error::InvalidParameter(format!(
            "order must lie in 1..={MAX_ORDER}, got {s}"
        )));
    }
    Ok(())
}

/// A vector of carry shifts, one entry per vertex subset w of {1..s},
/// indexed by the bitmask of w (bit i-1 set means coordinate i belongs
/// to w). Entries never exceed s; the carry map below preserves that.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CarryVector {
    s: u32,
    entries: Vec<u8>,
}

impl CarryVector {
    pub fn zero(s: u32) -> Result<CarryVector> {
        validate_order(s)?;
        Ok(CarryVector {
            s,
            entries: vec![0; 1 << s],
        })
    }

    pub fn from_entries(s: u32, entries: Vec<u8>) -> Result<CarryVector> {
        validate_order(s)?;
        if entries.len() != 1 << s {
            return Err(Error::InvalidParameter(format!(
                "carry vector of order {s} needs {} entries, got {}",
                1u32 << s,
                entries.len()
            )));
        }
        if let Some(&bad) = entries.iter().find(|&&e| e as u32 > s) {
            return Err(Error::InvalidParameter(format!(
                "carry entry {bad} exceeds the order {s}"
            )));
        }
        Ok(CarryVector { s, entries })
    }

    pub fn order(&self) -> u32 {
        self.s
    }

    /// Number of vertices, 2^s.
    pub fn dim(&self) -> usize {
        1 << self.s
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn entry(&self, omega: usize) -> u8 {
        self.entries[omega]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }
}

/// Exact number of order-s tuples over [0, n): all vertex sums in range.
///
/// Counted through the difference vector d = (n_1..n_s): for fixed d the
/// base point n_0 ranges over an interval of length (n - sum |d_i|)+, so
/// the total is sum over j of shell(j) * (n - j) with shell(j) the number
/// of d at l1-distance j. Closed forms are used for s <= 3.
pub fn count_parallelepipeds(s: u32, n: u64) -> u128 {
    let n = n as u128;
    match s {
        1 => n * n,
        2 => (2 * n * n * n + n) / 3,
        3 => (n * n * n * n + 2 * n * n) / 3,
        4 => {
            if n > 1 << 20 {
                return u128::MAX;
            }
            // shell_4(j) = 8 + 24(j-1) + 16(j-1)(j-2) + (8/3)(j-1)(j-2)(j-3)
            let mut acc: u128 = n; // j = 0: shell 1, weight n
            for j in 1..n {
                let a = j - 1;
                let shell = 8 + 24 * a + 16 * a * a.saturating_sub(1)
                    + 8 * a * a.saturating_sub(1) * a.saturating_sub(2) / 3;
                acc += shell * (n - j);
            }
            acc
        }
        _ => panic!("order out of range"),
    }
}

/// Streaming enumeration of all order-s tuples (n_0, n_1, ..., n_s) whose
/// vertex sums all lie in [0, n), in lexicographic order (each coordinate
/// ascending). The per-coordinate ranges are intervals, so no candidate
/// is ever generated and discarded.
pub fn enumerate_parallelepipeds(s: u32, n: u64) -> Result<ParallelepipedIter> {
    validate_order(s)?;
    if n == 0 {
        return Err(Error::InvalidParameter("range must be non-empty".into()));
    }
    if n > (1 << 62) {
        return Err(Error::InvalidParameter("range exceeds 2^62".into()));
    }
    Ok(ParallelepipedIter {
        n: n as i64,
        s: s as usize,
        tuple: vec![0; s as usize + 1],
        vmin: vec![0; s as usize + 1],
        vmax: vec![0; s as usize + 1],
        started: false,
        done: false,
    })
}

pub struct ParallelepipedIter {
    n: i64,
    s: usize,
    tuple: Vec<i64>,
    // smallest and largest vertex sum over subsets of the first i coords
    vmin: Vec<i64>,
    vmax: Vec<i64>,
    started: bool,
    done: bool,
}

impl ParallelepipedIter {
    /// Set coordinates depth..=s to the bottom of their ranges.
    fn reset_tail(&mut self, depth: usize) {
        for j in depth..=self.s {
            let lo = -self.vmin[j - 1];
            self.tuple[j] = lo;
            self.vmin[j] = self.vmin[j - 1] + lo.min(0);
            self.vmax[j] = self.vmax[j - 1] + lo.max(0);
        }
    }
}

impl Iterator for ParallelepipedIter {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.reset_tail(1);
            return Some(self.tuple.clone());
        }
        let mut i = self.s;
        loop {
            if i == 0 {
                self.tuple[0] += 1;
                if self.tuple[0] >= self.n {
                    self.done = true;
                    return None;
                }
                self.vmin[0] = self.tuple[0];
                self.vmax[0] = self.tuple[0];
                self.reset_tail(1);
                return Some(self.tuple.clone());
            }
            self.tuple[i] += 1;
            if self.tuple[i] < self.n - self.vmax[i - 1] {
                self.vmin[i] = self.vmin[i - 1] + self.tuple[i].min(0);
                self.vmax[i] = self.vmax[i - 1] + self.tuple[i].max(0);
                self.reset_tail(i + 1);
                return Some(self.tuple.clone());
            }
            i -= 1;
        }
    }
}

// Shared leaf evaluation: vals holds the 2^s vertex sums of the current
// tuple; the weight's phase is the parity-signed sum of vertex phases.
#[inline]
fn leaf_angle(table: &[f64], r: &[u8], dim: usize, vals: &[i64; 16]) -> f64 {
    let mut angle = 0.0;
    for (omega, &v) in vals.iter().enumerate().take(dim) {
        let ph = table[(v + r[omega] as i64) as usize];
        if (omega as u32).count_ones() % 2 == 0 {
            angle += ph;
        } else {
            angle -= ph;
        }
    }
    angle
}

fn descend_pruned(
    table: &[f64],
    r: &[u8],
    s: usize,
    n: i64,
    depth: usize,
    vmin: i64,
    vmax: i64,
    vals: &mut [i64; 16],
    acc: &mut ComplexSum,
) {
    if depth > s {
        acc.add(unit(leaf_angle(table, r, 1 << s, vals)));
        return;
    }
    let half = 1usize << (depth - 1);
    for nd in -vmin..(n - vmax) {
        for k in 0..half {
            vals[k + half] = vals[k] + nd;
        }
        descend_pruned(
            table,
            r,
            s,
            n,
            depth + 1,
            vmin + nd.min(0),
            vmax + nd.max(0),
            vals,
            acc,
        );
    }
}

/// The order-s average A(f, r, n) by pruned enumeration.
///
/// `n` is the range length (q^L when working along a digit ladder). The
/// tuple count is checked against `budget` before any work happens.
pub fn parallelepiped_average<F: Sequence + ?Sized>(
    f: &F,
    r: &CarryVector,
    n: u64,
    budget: u64,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("range must be non-empty".into()));
    }
    let count = count_parallelepipeds(r.order(), n);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded {
            needed: count.min(u64::MAX as u128) as u64,
            budget,
        });
    }
    let s = r.order() as usize;
    // every argument is a vertex sum in [0, n) plus a shift <= s
    let table: Vec<f64> = (0..n + s as u64).map(|x| f.phase(x).turns()).collect();
    let total = tree_reduce(
        0,
        n,
        &|lo, hi| {
            let mut acc = ComplexSum::default();
            let mut vals = [0i64; 16];
            for n0 in lo..hi {
                vals[0] = n0 as i64;
                descend_pruned(
                    &table,
                    r.entries(),
                    s,
                    n as i64,
                    1,
                    n0 as i64,
                    n0 as i64,
                    &mut vals,
                    &mut acc,
                );
            }
            acc.value()
        },
        &|a, b| a + b,
    );
    Ok(total / count as f64)
}

fn descend_filtered(
    table: &[f64],
    s: usize,
    n: i64,
    depth: usize,
    vals: &mut [i64; 16],
    acc: &mut ComplexSum,
    accepted: &mut u64,
) {
    if depth > s {
        let dim = 1 << s;
        if vals.iter().take(dim).any(|&v| v < 0 || v >= n) {
            return;
        }
        *accepted += 1;
        let mut angle = 0.0;
        for (omega, &v) in vals.iter().enumerate().take(dim) {
            if (omega as u32).count_ones() % 2 == 0 {
                angle += table[v as usize];
            } else {
                angle -= table[v as usize];
            }
        }
        acc.add(unit(angle));
        return;
    }
    let half = 1usize << (depth - 1);
    for nd in -(n - 1)..n {
        for k in 0..half {
            vals[k + half] = vals[k] + nd;
        }
        descend_filtered(table, s, n, depth + 1, vals, acc, accepted);
    }
}

/// The box norm of order s on [0, n) by an unpruned scan: every
/// difference vector in (-n, n)^s is visited and tuples are kept by an
/// explicit check of all 2^s vertex sums. Deliberately the plainest
/// implementation in the crate; it is the oracle the faster routes are
/// validated against.
pub fn gowers_norm_bruteforce<F: Sequence + ?Sized>(
    f: &F,
    s: u32,
    n: u64,
    budget: u64,
) -> Result<f64> {
    validate_order(s)?;
    if n == 0 {
        return Err(Error::InvalidParameter("range must be non-empty".into()));
    }
    let mut work: u128 = n as u128;
    for _ in 0..s {
        work = work.saturating_mul(2 * n as u128 - 1);
    }
    if work > budget as u128 {
        return Err(Error::BudgetExceeded {
            needed: work.min(u64::MAX as u128) as u64,
            budget,
        });
    }
    let table: Vec<f64> = (0..n).map(|x| f.phase(x).turns()).collect();
    let (total, accepted) = tree_reduce(
        0,
        n,
        &|lo, hi| {
            let mut acc = ComplexSum::default();
            let mut accepted = 0u64;
            let mut vals = [0i64; 16];
            for n0 in lo..hi {
                vals[0] = n0 as i64;
                descend_filtered(
                    &table,
                    s as usize,
                    n as i64,
                    1,
                    &mut vals,
                    &mut acc,
                    &mut accepted,
                );
            }
            (acc.value(), accepted)
        },
        &|a, b| (a.0 + b.0, a.1 + b.1),
    );
    let count = count_parallelepipeds(s, n);
    if accepted as u128 != count {
        return Err(Error::Numeric(format!(
            "tuple filter accepted {accepted}, count formula says {count}"
        )));
    }
    let avg = total / count as f64;
    if avg.im.abs() > 1e-10 {
        return Err(Error::Numeric(format!(
            "box average has imaginary part {:.3e}",
            avg.im
        )));
    }
    if avg.re < -1e-12 {
        return Err(Error::Numeric(format!(
            "box average is negative: {:.3e}",
            avg.re
        )));
    }
    Ok(avg.re.max(0.0).powf(1.0 / (1u64 << s) as f64))
}

// Exact regrouping for order 2. Splitting the weight by whether a vertex
// involves the second difference b and substituting y = n_0 + b makes
// the (n_0, y) double sum factor over the common interval
// J_a = [max(0, -a), n - max(0, a)):
//
//   A * count = sum_a  [sum_{x in J_a} f(x+r_00) conj f(x+a+r_10)]
//             * conj [sum_{y in J_a} f(y+r_01) conj f(y+a+r_11)]
//
// which is O(n^2) instead of O(n^3), term-for-term equal to the
// definition (the substitution is a bijection on tuples).
fn folded_order2<F: Sequence + ?Sized>(f: &F, r: &CarryVector, n: u64) -> Complex64 {
    let table: Vec<Complex64> = (0..n + 2).map(|x| f.value(x)).collect();
    let rr = r.entries();
    let (r00, r10, r01, r11) = (
        rr[0] as usize,
        rr[1] as usize,
        rr[2] as usize,
        rr[3] as usize,
    );
    let n_i = n as i64;
    let total = tree_reduce(
        0,
        2 * n - 1,
        &|ilo, ihi| {
            let mut acc = ComplexSum::default();
            for idx in ilo..ihi {
                let a = idx as i64 - (n_i - 1);
                let lo = 0.max(-a) as usize;
                let hi = (n_i - 0.max(a)) as usize;
                let ao = a as isize;
                let mut st = ComplexSum::default();
                let mut sv = ComplexSum::default();
                for x in lo..hi {
                    let xa = (x as isize + ao) as usize;
                    st.add(table[x + r00] * table[xa + r10].conj());
                    sv.add(table[x + r01] * table[xa + r11].conj());
                }
                acc.add(st.value() * sv.value().conj());
            }
            acc.value()
        },
        &|a, b| a + b,
    );
    total / count_parallelepipeds(2, n) as f64
}

// Exact regrouping for order 3: with the first two differences (a, b)
// fixed, vertices split by whether they involve the third difference c,
// and y = n_0 + c ranges over the same interval J_ab as n_0, so
//
//   A * count = sum_{a,b} S1(a,b) * conj S2(a,b),
//
// S1/S2 being order-2 weight sums over J_ab with the shift entries of
// the c = 0 / c = 1 vertex halves. O(n^3) instead of O(n^4).
fn folded_order3<F: Sequence + ?Sized>(f: &F, r: &CarryVector, n: u64) -> Complex64 {
    let table: Vec<Complex64> = (0..n + 3).map(|x| f.value(x)).collect();
    let rr = r.entries();
    let n_i = n as i64;
    let total = tree_reduce(
        0,
        2 * n - 1,
        &|ilo, ihi| {
            let mut acc = ComplexSum::default();
            for idx in ilo..ihi {
                let a = idx as i64 - (n_i - 1);
                for b in -(n_i - 1)..n_i {
                    let lo = 0.max(-a).max(-b).max(-(a + b));
                    let hi = n_i - 0.max(a).max(b).max(a + b);
                    if lo >= hi {
                        continue;
                    }
                    let mut s1 = ComplexSum::default();
                    let mut s2 = ComplexSum::default();
                    for x in lo..hi {
                        let x0 = x as usize;
                        let xa = (x + a) as usize;
                        let xb = (x + b) as usize;
                        let xab = (x + a + b) as usize;
                        s1.add(
                            table[x0 + rr[0] as usize]
                                * table[xa + rr[1] as usize].conj()
                                * table[xb + rr[2] as usize].conj()
                                * table[xab + rr[3] as usize],
                        );
                        s2.add(
                            table[x0 + rr[4] as usize]
                                * table[xa + rr[5] as usize].conj()
                                * table[xb + rr[6] as usize].conj()
                                * table[xab + rr[7] as usize],
                        );
                    }
                    acc.add(s1.value() * s2.value().conj());
                }
            }
            acc.value()
        },
        &|a, b| a + b,
    );
    total / count_parallelepipeds(3, n) as f64
}

/// A(f, r, n) through the exact regroupings; orders 2 and 3 only.
///
/// Same value as [`parallelepiped_average`] up to summation rounding,
/// at O(n^2) / O(n^3) cost instead of O(n^3) / O(n^4).
pub fn parallelepiped_average_folded<F: Sequence + ?Sized>(
    f: &F,
    r: &CarryVector,
    n: u64,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("range must be non-empty".into()));
    }
    if n > (1 << 21) {
        return Err(Error::InvalidParameter(
            "folded averages build a value table; range is capped at 2^21".into(),
        ));
    }
    match r.order() {
        2 => Ok(folded_order2(f, r, n)),
        3 => Ok(folded_order3(f, r, n)),
        s => Err(Error::InvalidParameter(format!(
            "folded fast path covers orders 2 and 3, got {s}"
        ))),
    }
}

/// Box norm via the folded averages (orders 2 and 3).
pub fn gowers_norm_folded<F: Sequence + ?Sized>(f: &F, s: u32, n: u64) -> Result<f64> {
    let avg = parallelepiped_average_folded(f, &CarryVector::zero(s)?, n)?;
    if avg.im.abs() > 1e-10 {
        return Err(Error::Numeric(format!(
            "box average has imaginary part {:.3e}",
            avg.im
        )));
    }
    if avg.re < -1e-12 {
        return Err(Error::Numeric(format!(
            "box average is negative: {:.3e}",
            avg.re
        )));
    }
    Ok(avg.re.max(0.0).powf(1.0 / (1u64 << s) as f64))
}

/// Carries produced at digit position l: entry w of the result is
/// floor((sum_{i in w} e_i + e_0 + r_w) / q^l) for the digit-block tuple
/// e (each entry below q^l). Outputs stay bounded by the order s because
/// (s+1)(q^l - 1) + s < (s+1) q^l.
pub fn carry_map(r: &CarryVector, e: &[u64], q: u32, l: u32) -> Result<CarryVector> {
    let s = r.order();
    if e.len() != s as usize + 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} digit-block entries, got {}",
            s + 1,
            e.len()
        )));
    }
    let ql = checked_pow(q, l)?;
    if let Some(&bad) = e.iter().find(|&&x| x >= ql) {
        return Err(Error::InvalidParameter(format!(
            "digit block {bad} is not below q^l = {ql}"
        )));
    }
    let dim = r.dim();
    let mut entries = vec![0u8; dim];
    for (omega, slot) in entries.iter_mut().enumerate() {
        let mut sum = e[0];
        for i in 0..s as usize {
            if omega >> i & 1 == 1 {
                sum += e[i + 1];
            }
        }
        *slot = ((sum + r.entry(omega) as u64) / ql) as u8;
    }
    // bounded by s per the division above, so this cannot fail
    CarryVector::from_entries(s, entries)
}

/// Transition weights of the digit-split at position l: entry r' holds
///
///   E over digit blocks e in [0, q^l)^(s+1) of
///     prod_w C^|w| f((e_0 + sum_{i in w} e_i + r_w) mod q^l)
///     restricted to carry_map(r, e, q, l) = r'.
///
/// Rows are sparse maps keyed by the carry entries; the total variation
/// of a row never exceeds 1.
#[derive(Clone, Debug)]
pub struct WeightMap {
    level: u32,
    s: u32,
    entries: BTreeMap<Vec<u8>, Complex64>,
}

impl WeightMap {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn order(&self) -> u32 {
        self.s
    }

    pub fn rows(&self) -> &BTreeMap<Vec<u8>, Complex64> {
        &self.entries
    }

    pub fn get(&self, r: &CarryVector) -> Complex64 {
        self.entries
            .get(r.entries())
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Sum of |entry| over the row; at most 1 by the triangle inequality.
    pub fn row_mass(&self) -> f64 {
        let mut acc = Neumaier::default();
        for w in self.entries.values() {
            acc.add(w.norm());
        }
        acc.value()
    }
}

pub fn weight_map(f: &QMultSeq, r: &CarryVector, l: u32, budget: u64) -> Result<WeightMap> {
    if l == 0 {
        // identity split: all mass on r' = r with weight 1
        let mut entries = BTreeMap::new();
        entries.insert(r.entries().to_vec(), Complex64::new(1.0, 0.0));
        return Ok(WeightMap {
            level: 0,
            s: r.order(),
            entries,
        });
    }
    let q = f.q();
    let s = r.order();
    let ql = checked_pow(q, l)?;
    let mut tuples: u128 = 1;
    for _ in 0..=s {
        tuples = tuples.saturating_mul(ql as u128);
    }
    if tuples > budget as u128 {
        return Err(Error::BudgetExceeded {
            needed: tuples.min(u64::MAX as u128) as u64,
            budget,
        });
    }
    let dim = r.dim();
    // phases of f on [0, q^l), the low digit blocks
    let low: Vec<f64> = (0..ql).map(|x| f.eval_phase(x).turns()).collect();
    let mut sums: BTreeMap<Vec<u8>, ComplexSum> = BTreeMap::new();
    let mut e = vec![0u64; s as usize + 1];
    loop {
        let mut angle = 0.0;
        let mut carries = vec![0u8; dim];
        for (omega, slot) in carries.iter_mut().enumerate() {
            let mut sum = e[0];
            for i in 0..s as usize {
                if omega >> i & 1 == 1 {
                    sum += e[i + 1];
                }
            }
            sum += r.entry(omega) as u64;
            let ph = low[(sum % ql) as usize];
            if (omega as u32).count_ones() % 2 == 0 {
                angle += ph;
            } else {
                angle -= ph;
            }
            *slot = (sum / ql) as u8;
        }
        sums.entry(carries).or_default().add(unit(angle));
        // odometer over the digit blocks
        let mut i = 0;
        loop {
            if i == e.len() {
                let entries = sums
                    .into_iter()
                    .map(|(k, v)| (k, v.value() / tuples as f64))
                    .collect();
                return Ok(WeightMap {
                    level: l,
                    s,
                    entries,
                });
            }
            e[i] += 1;
            if e[i] < ql {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

/// Certified constant K(s) for the digit-split recursion: the defect of
/// [`recursive_average`] against the direct average is at most
/// min(2, K(s) * q^-(L-l)) for every q-multiplicative f, every carry
/// vector with entries <= s, and every split position l <= L.
///
/// Derivation sketch (T = q^(L-l)): splitting each tuple coordinate into
/// low block and high part maps the tuple set bijectively onto pairs
/// (e, m); the recursion replaces the e-dependent high-part domain M(e)
/// by the straight tuple set over [0, T), and a triangle inequality
/// bounds the defect by 2 q^(l(s+1)) E_e |M(e) sym-diff Pi(T)| / count.
/// Each vertex window of M(e) is the straight window shifted by the
/// carry floor(sum of blocks / q^l) <= s, so the symmetric difference
/// lives in slabs of width 2*carry+2 per vertex; slab cross-sections
/// are at most (T + 2s + 2)^s by counting free coordinates, and the
/// expected carry has the closed form (|w|-1)(q^l-1)/(2 q^l). Summing
/// over vertices and dividing by count >= 2^s N^(s+1) / (s+1)! gives a
/// closed form below K(s)/T whenever K(s)/T < 2; smaller T is covered
/// by the trivial bound 2.
pub fn recursion_error_constant(s: u32) -> f64 {
    match s {
        1 => 8.0,
        2 => 40.0,
        3 => 200.0,
        _ => 1000.0,
    }
}

/// A(f, r, L levels) through the digit split at position l: the weighted
/// sum over carry vectors r' of A(shift-l f, r', L-l levels), plus a
/// certified error bound.
///
/// `l = 0` reproduces [`parallelepiped_average`] exactly (error 0).
pub fn recursive_average(
    f: &QMultSeq,
    r: &CarryVector,
    l_total: u32,
    l_split: u32,
    budget: u64,
) -> Result<(Complex64, f64)> {
    if l_split > l_total {
        return Err(Error::InvalidParameter(format!(
            "split position {l_split} exceeds total levels {l_total}"
        )));
    }
    let q = f.q();
    if l_split == 0 {
        let n = checked_pow(q, l_total)?;
        return Ok((parallelepiped_average(f, r, n, budget)?, 0.0));
    }
    let w = weight_map(f, r, l_split, budget)?;
    let g = f.shift(l_split);
    let t = checked_pow(q, l_total - l_split)?;
    let mut acc = ComplexSum::default();
    for (entries, weight) in w.rows() {
        let rr = CarryVector::from_entries(r.order(), entries.clone())?;
        let a = parallelepiped_average(&g, &rr, t, budget)?;
        acc.add(weight * a);
    }
    let err = (recursion_error_constant(r.order())
        * (q as f64).powi(-((l_total - l_split) as i32)))
    .min(2.0);
    Ok((acc.value(), err))
}

/// Optional restriction for [`box_average_exact`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BoxCondition {
    /// Average over the full box [0, q^L)^(s+1).
    None,
    /// Restrict to tuples whose full vertex sum (all coordinates plus its
    /// shift) stays below q^L, i.e. the final carry at the all-ones
    /// vertex is zero. Subset sums are dominated by the full sum, so
    /// with r = 0 this forces every vertex sum below q^L.
    SumBelowQL,
}

/// E over e in [0, q^L)^(s+1) of prod_w C^|w| f(e_0 + sum_{i in w} e_i + r_w),
/// exactly, by a dynamic program over carry states.
///
/// Digits of each coordinate are processed from least significant to
/// most; the state is the vector of carries at the 2^s vertex sums,
/// which stays entrywise <= s. Cost O(L * states * q^(s+1)) with at most
/// (s+1)^(2^s) states.
pub fn box_average_exact(
    f: &QMultSeq,
    r: &CarryVector,
    l_levels: u32,
    condition: BoxCondition,
) -> Result<Complex64> {
    let q = f.q();
    let s = r.order();
    let dim = r.dim();
    let mut transitions: u64 = 1;
    for _ in 0..=s {
        transitions = transitions.saturating_mul(q as u64);
    }
    if transitions > 1 << 20 {
        return Err(Error::BudgetExceeded {
            needed: transitions,
            budget: 1 << 20,
        });
    }
    // all digit tuples (b_0..b_s), each below q, with their vertex sums
    let mut tuple_sums: Vec<Vec<u32>> = Vec::with_capacity(transitions as usize);
    let mut b = vec![0u32; s as usize + 1];
    'outer: loop {
        let mut sums = vec![0u32; dim];
        for (omega, slot) in sums.iter_mut().enumerate() {
            let mut sum = b[0];
            for i in 0..s as usize {
                if omega >> i & 1 == 1 {
                    sum += b[i + 1];
                }
            }
            *slot = sum;
        }
        tuple_sums.push(sums);
        let mut i = 0;
        loop {
            if i == b.len() {
                break 'outer;
            }
            b[i] += 1;
            if b[i] < q {
                break;
            }
            b[i] = 0;
            i += 1;
        }
    }
    let norm = 1.0 / transitions as f64;
    // state: carry vector entries -> (weighted amplitude, plain mass)
    let mut states: BTreeMap<Vec<u8>, (Complex64, f64)> = BTreeMap::new();
    states.insert(r.entries().to_vec(), (Complex64::new(1.0, 0.0), 1.0));
    for t in 0..l_levels {
        let row: Vec<f64> = (0..q).map(|a| f.phase_at(t, a).turns()).collect();
        let mut next: BTreeMap<Vec<u8>, (Complex64, f64)> = BTreeMap::new();
        for (carry, (amp, mass)) in &states {
            for sums in &tuple_sums {
                let mut angle = 0.0;
                let mut out = vec![0u8; dim];
                for omega in 0..dim {
                    let total = sums[omega] + carry[omega] as u32;
                    let ph = row[(total % q) as usize];
                    if (omega as u32).count_ones() % 2 == 0 {
                        angle += ph;
                    } else {
                        angle -= ph;
                    }
                    out[omega] = (total / q) as u8;
                }
                let slot = next
                    .entry(out)
                    .or_insert((Complex64::new(0.0, 0.0), 0.0));
                slot.0 += amp * unit(angle) * norm;
                slot.1 += mass * norm;
            }
        }
        states = next;
        if states.len() > 1 << 22 {
            return Err(Error::BudgetExceeded {
                needed: states.len() as u64,
                budget: 1 << 22,
            });
        }
    }
    let ql = checked_pow(q, l_levels)?;
    let mut num = ComplexSum::default();
    let mut den = Neumaier::default();
    for (carry, (amp, mass)) in &states {
        if condition == BoxCondition::SumBelowQL && carry[dim - 1] != 0 {
            continue;
        }
        let mut angle = 0.0;
        for (omega, &c) in carry.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let arg = (c as u64).checked_mul(ql).ok_or_else(|| {
                Error::InvalidParameter("carry tail overflows the index range".into())
            })?;
            let ph = f.eval_phase(arg).turns();
            if (omega as u32).count_ones() % 2 == 0 {
                angle += ph;
            } else {
                angle -= ph;
            }
        }
        num.add(amp * unit(angle));
        den.add(*mass);
    }
    let den = den.value();
    if den <= 0.0 {
        return Err(Error::Numeric(
            "restriction removed every tuple from the box".into(),
        ));
    }
    Ok(num.value() / den)
}

/// Per-block uniformity deficits along a digit ladder.
///
/// Block i spans digit positions [K_i, K_{i+1}); its deficit is
/// 1 - (box norm of the shifted sequence on [0, q^(L_i))). The final
/// order-s average over the whole span [0, q^(K_M)) is recorded next to
/// the cumulative deficit so the two can be compared: blocks that all
/// look uniform force the long average down.
#[derive(Clone, Debug)]
pub struct EpsilonLedger {
    pub order: u32,
    /// K_0 = 0 < K_1 < ... < K_M, the block boundaries.
    pub breakpoints: Vec<u32>,
    pub block_lengths: Vec<u32>,
    /// 1 - block norm, clamped to [0, 1].
    pub deficits: Vec<f64>,
    pub cumulative: f64,
    /// A(f, 0, K_M levels).
    pub final_average: Complex64,
}

pub fn epsilon_ledger(
    f: &QMultSeq,
    s: u32,
    block_lengths: &[u32],
    min_block: u32,
    budget: u64,
) -> Result<EpsilonLedger> {
    validate_order(s)?;
    if block_lengths.is_empty() {
        return Err(Error::InvalidParameter("no blocks given".into()));
    }
    if min_block == 0 {
        return Err(Error::InvalidParameter("minimum block length is 1".into()));
    }
    if let Some(&bad) = block_lengths.iter().find(|&&l| l < min_block) {
        return Err(Error::InvalidParameter(format!(
            "block length {bad} is below the minimum {min_block}"
        )));
    }
    let q = f.q();
    let mut breakpoints = vec![0u32];
    let mut deficits = Vec::with_capacity(block_lengths.len());
    let mut k = 0u32;
    for &li in block_lengths {
        let g = f.shift(k);
        let n = checked_pow(q, li)?;
        let norm = gowers_norm_bruteforce(&g, s, n, budget)?;
        deficits.push((1.0 - norm).clamp(0.0, 1.0));
        k += li;
        breakpoints.push(k);
    }
    let n_full = checked_pow(q, k)?;
    let final_average = parallelepiped_average(f, &CarryVector::zero(s)?, n_full, budget)?;
    let mut cum = Neumaier::default();
    for &d in &deficits {
        cum.add(d);
    }
    Ok(EpsilonLedger {
        order: s,
        breakpoints,
        block_lengths: block_lengths.to_vec(),
        deficits,
        cumulative: cum.value(),
        final_average,
    })
}

/// Best linear-phase model e(alpha n + beta) for f on [0, q^L).
///
/// alpha is located by scanning the q-adic grid of denominator q^L for
/// the largest |E f(n) e(-alpha n)| and polishing inside the winning
/// cell by golden section; beta is then the argument of the correlation,
/// and the reported residual is E |f(n) - e(alpha n + beta)|.
///
/// The scan is quadratic in q^L, so the range is capped at 2^13.
pub fn fit_linear_phase<F: Sequence + ?Sized>(
    f: &F,
    q: u32,
    l_levels: u32,
) -> Result<(Phase, Phase, f64)> {
    let n = checked_pow(q, l_levels)?;
    if n > (1 << 13) {
        return Err(Error::InvalidParameter(
            "phase fit scans all q-adic frequencies; q^L is capped at 8192".into(),
        ));
    }
    let vals: Vec<Complex64> = (0..n).map(|x| f.value(x)).collect();
    let roots: Vec<Complex64> = (0..n).map(|k| unit(k as f64 / n as f64)).collect();
    let mut best_b = 0u64;
    let mut best = -1.0;
    for b in 0..n {
        let mut acc = ComplexSum::default();
        for (x, v) in vals.iter().enumerate() {
            let k = ((x as u128 * b as u128) % n as u128) as usize;
            acc.add(v * roots[k].conj());
        }
        let m = acc.value().norm();
        if m > best + 1e-15 {
            best = m;
            best_b = b;
        }
    }
    let corr_mag = |alpha: f64| -> f64 {
        let mut acc = ComplexSum::default();
        for (x, v) in vals.iter().enumerate() {
            acc.add(v * unit(x as f64 * alpha).conj());
        }
        acc.value().norm()
    };
    let cell = 1.0 / n as f64;
    let center = best_b as f64 / n as f64;
    let (golden_alpha, golden_val) = golden_max(corr_mag, center - cell, center + cell, 48);
    let mut alpha_raw = if golden_val > best { golden_alpha } else { center };
    // Golden section stalls at sqrt(eps) on the flat top of |c(alpha)|;
    // polish to the stationary point of |c|^2 with its exact derivatives
    // (c' and c'' are plain weighted sums), where Newton is quadratic.
    let tau = std::f64::consts::TAU;
    let moments = |alpha: f64| -> (Complex64, Complex64, Complex64) {
        let (mut c0, mut c1, mut c2) =
            (ComplexSum::default(), ComplexSum::default(), ComplexSum::default());
        for (x, v) in vals.iter().enumerate() {
            let w = v * unit(x as f64 * alpha).conj();
            c0.add(w);
            c1.add(w * x as f64);
            c2.add(w * (x as f64) * (x as f64));
        }
        (c0.value(), c1.value(), c2.value())
    };
    let mi = Complex64::new(0.0, -1.0);
    for _ in 0..6 {
        let (c0, c1, c2) = moments(alpha_raw);
        let d1 = mi * tau * c1;
        let d2 = -tau * tau * c2;
        let g1 = 2.0 * (c0.conj() * d1).re;
        let g2 = 2.0 * ((d1.conj() * d1).re + (c0.conj() * d2).re);
        if g2 >= 0.0 || !g1.is_finite() {
            break;
        }
        let step = g1 / g2;
        if !step.is_finite() || step.abs() > cell {
            break;
        }
        alpha_raw -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    let alpha = if corr_mag(alpha_raw) >= golden_val.max(best) - 1e-12 {
        Phase::new(alpha_raw)
    } else {
        Phase::new(center)
    };
    let corr = mean_complex(0, n, |x| vals[x as usize] * unit(x as f64 * alpha.turns()).conj());
    let beta = Phase::new(corr.arg() / std::f64::consts::TAU);
    let residual = mean_f64(0, n, |x| {
        (vals[x as usize] - unit(Phase::new(x as f64 * alpha.turns()).add(beta).turns())).norm()
    });
    Ok((alpha, beta, residual))
}

/// How a norm value was computed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NormMethod {
    BruteForce,
    FoldedExact,
    DigitDp,
    Recursive,
}

impl std::fmt::Display for NormMethod {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            NormMethod::BruteForce => "brute",
            NormMethod::FoldedExact => "folded",
            NormMethod::DigitDp => "dp",
            NormMethod::Recursive => "recursive",
        };
        write!(fm, "{name}")
    }
}

#[derive(Clone, Debug)]
pub struct NormValue {
    pub s: u32,
    pub level: u32,
    pub method: NormMethod,
    pub value: f64,
    /// Certified bound on |reported - true|; 0 for the exact routes.
    pub error_bound: f64,
}

/// Box norms of orders 2..=s_max on [0, q^L), plus the linear-phase
/// correlation supremum as the order-2 proxy.
#[derive(Clone, Debug)]
pub struct UniformityReport {
    pub norms: Vec<NormValue>,
    pub sup_linear: SupResult,
}

pub fn uniformity_report(
    f: &QMultSeq,
    s_max: u32,
    l_levels: u32,
    beam: u64,
    budget: u64,
) -> Result<UniformityReport> {
    if !(2..=MAX_ORDER).contains(&s_max) {
        return Err(Error::InvalidParameter(format!(
            "report covers orders 2..={MAX_ORDER}, got {s_max}"
        )));
    }
    let n = checked_pow(f.q(), l_levels)?;
    let mut norms = Vec::new();
    for s in 2..=s_max {
        let (value, method) = if s <= 3 {
            (gowers_norm_folded(f, s, n)?, NormMethod::FoldedExact)
        } else {
            (gowers_norm_bruteforce(f, s, n, budget)?, NormMethod::BruteForce)
        };
        norms.push(NormValue {
            s,
            level: l_levels,
            method,
            value,
            error_bound: 0.0,
        });
    }
    let sup_linear = sup_linear_correlation(f, l_levels, beam)?;
    Ok(UniformityReport { norms, sup_linear })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{FnSeq, SeqSpec};

    fn thue_morse() -> QMultSeq {
        QMultSeq::strongly_multiplicative(2, &[0.5]).unwrap()
    }

    #[test]
    fn carry_map_small_example() {
        let r = CarryVector::zero(2).unwrap();
        let c = carry_map(&r, &[1, 1, 1], 2, 1).unwrap();
        assert_eq!(c.entries(), &[0, 1, 1, 1]);
    }

    #[test]
    fn carries_stay_bounded_by_order() {
        // scalar form of the closure bound: the largest possible vertex
        // sum (s+1)(q^l - 1) plus the largest shift s still divides down
        // to s
        for q in [2u64, 3, 5] {
            for l in [1u32, 2] {
                let ql = q.pow(l);
                for s in 1u64..=4 {
                    let max_sum = (s + 1) * (ql - 1) + s;
                    assert_eq!(max_sum / ql, s);
                }
            }
        }
        // vector spot checks: every carry entry of every map stays <= s
        let f = thue_morse();
        for s in [2u32, 3] {
            let w = weight_map(&f, &CarryVector::zero(s).unwrap(), 2, 1 << 20).unwrap();
            for entries in w.rows().keys() {
                assert!(entries.iter().all(|&c| c as u32 <= s));
            }
        }
    }

    #[test]
    fn enumeration_matches_small_hand_count() {
        let got: Vec<Vec<i64>> = enumerate_parallelepipeds(1, 2).unwrap().collect();
        assert_eq!(got.len(), 4);
        for expect in [[0, 0], [0, 1], [1, 0], [1, -1]] {
            assert!(got.iter().any(|t| t.as_slice() == expect));
        }
    }

    #[test]
    fn enumeration_of_single_point_range() {
        for s in 1..=4 {
            let got: Vec<Vec<i64>> = enumerate_parallelepipeds(s, 1).unwrap().collect();
            assert_eq!(got, vec![vec![0i64; s as usize + 1]]);
        }
    }

    #[test]
    fn enumeration_count_matches_formula() {
        for s in 1..=4u32 {
            for n in [1u64, 2, 3, 5, 8] {
                let got = enumerate_parallelepipeds(s, n).unwrap().count();
                assert_eq!(got as u128, count_parallelepipeds(s, n), "s={s} n={n}");
            }
        }
    }

    #[test]
    fn enumerated_tuples_satisfy_vertex_bounds() {
        for t in enumerate_parallelepipeds(3, 4).unwrap() {
            for omega in 0..8usize {
                let mut v = t[0];
                for i in 0..3 {
                    if omega >> i & 1 == 1 {
                        v += t[i + 1];
                    }
                }
                assert!((0..4).contains(&v));
            }
        }
    }

    #[test]
    fn count_lower_bound_used_by_error_constant() {
        // the derivation of recursion_error_constant divides by
        // 2^s n^(s+1) / (s+1)!; check the count really dominates that
        let fact = [1u128, 2, 6, 24, 120];
        for s in 1..=4u32 {
            for n in 1..=40u64 {
                let lhs = count_parallelepipeds(s, n) * fact[s as usize + 1 - 1];
                let rhs = (1u128 << s) * (n as u128).pow(s + 1);
                assert!(lhs >= rhs, "s={s} n={n}");
            }
        }
    }

    #[test]
    fn constant_sequence_is_perfectly_structured() {
        let one = FnSeq(|_| Phase::ZERO);
        for s in 1..=3u32 {
            let r = CarryVector::zero(s).unwrap();
            let a = parallelepiped_average(&one, &r, 16, 1 << 30).unwrap();
            assert!((a.re - 1.0).abs() < 1e-12 && a.im.abs() < 1e-12);
            let norm = gowers_norm_bruteforce(&one, s, 8, 1 << 30).unwrap();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert!((gowers_norm_folded(&one, 2, 64).unwrap() - 1.0).abs() < 1e-12);
        assert!((gowers_norm_folded(&one, 3, 16).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_sign_keeps_full_norm() {
        // f(n) = (-1)^n: the order-2 weight is (-1)^(2 n_0 + 2 n_1 + 2 n_2)
        let alt = FnSeq(|n: u64| Phase::new(0.5 * n as f64));
        let r = CarryVector::zero(2).unwrap();
        let a = parallelepiped_average(&alt, &r, 8, 1 << 30).unwrap();
        assert!((a.re - 1.0).abs() < 1e-12 && a.im.abs() < 1e-12);
    }

    #[test]
    fn weight_rows_are_subprobability_with_trivial_phases() {
        let one = QMultSeq::strongly_multiplicative(3, &[0.0, 0.0]).unwrap();
        let r = CarryVector::zero(2).unwrap();
        let w = weight_map(&one, &r, 1, 1 << 20).unwrap();
        // with f = 1 the weights are exactly the carry distribution
        let mut total = 0.0;
        for v in w.rows().values() {
            assert!(v.im.abs() < 1e-15 && v.re >= 0.0);
            total += v.re;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.row_mass() <= 1.0 + 1e-12);
    }

    #[test]
    fn weight_map_at_level_zero_is_identity() {
        let f = thue_morse();
        let r = CarryVector::from_entries(2, vec![1, 0, 2, 1]).unwrap();
        let w = weight_map(&f, &r, 0, 1 << 20).unwrap();
        assert_eq!(w.rows().len(), 1);
        let got = w.get(&r);
        assert!((got.re - 1.0).abs() < 1e-15 && got.im.abs() < 1e-15);
    }

    #[test]
    fn recursion_at_zero_split_matches_direct() {
        let f = thue_morse();
        let r = CarryVector::zero(2).unwrap();
        let (rec, err) = recursive_average(&f, &r, 4, 0, 1 << 30).unwrap();
        let direct = parallelepiped_average(&f, &r, 16, 1 << 30).unwrap();
        assert_eq!(err, 0.0);
        assert!((rec - direct).norm() < 1e-14);
    }

    #[test]
    fn box_dp_on_constant_sequence() {
        let one = QMultSeq::strongly_multiplicative(2, &[0.0]).unwrap();
        let r = CarryVector::zero(2).unwrap();
        for cond in [BoxCondition::None, BoxCondition::SumBelowQL] {
            let v = box_average_exact(&one, &r, 6, cond).unwrap();
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn box_dp_single_level_matches_direct_enumeration() {
        let spec: SeqSpec = "random:q=3,levels=4,seed=11".parse().unwrap();
        let built = spec.build().unwrap();
        let f = built.as_qmult().unwrap();
        let r = CarryVector::from_entries(2, vec![0, 1, 0, 2]).unwrap();
        let dp = box_average_exact(f, &r, 1, BoxCondition::None).unwrap();
        let mut acc = ComplexSum::default();
        for e0 in 0..3u64 {
            for e1 in 0..3u64 {
                for e2 in 0..3u64 {
                    let sums = [e0, e0 + e1, e0 + e2, e0 + e1 + e2];
                    let mut angle = 0.0;
                    for (omega, &v) in sums.iter().enumerate() {
                        let ph = f.eval_phase(v + r.entry(omega) as u64).turns();
                        if (omega as u32).count_ones() % 2 == 0 {
                            angle += ph;
                        } else {
                            angle -= ph;
                        }
                    }
                    acc.add(unit(angle));
                }
            }
        }
        let direct = acc.value() / 27.0;
        assert!((dp - direct).norm() < 1e-12);
    }

    #[test]
    fn linear_phase_fit_recovers_a_pure_phase() {
        let f = FnSeq(|n: u64| Phase::new(0.3 * n as f64 + 0.1));
        let (alpha, beta, residual) = fit_linear_phase(&f, 2, 8).unwrap();
        assert!((alpha.turns() - 0.3).abs() < 1e-9, "alpha {}", alpha.turns());
        assert!((beta.turns() - 0.1).abs() < 1e-9, "beta {}", beta.turns());
        assert!(residual < 1e-8, "residual {residual}");
    }

    #[test]
    fn linear_phase_fit_rejects_thue_morse() {
        let f = thue_morse();
        for l in [6u32, 8] {
            let (_, _, residual) = fit_linear_phase(&f, 2, l).unwrap();
            assert!(residual > 0.5, "L={l} residual {residual}");
        }
    }

    #[test]
    fn linear_phase_fit_of_constant_is_zero() {
        let one = FnSeq(|_| Phase::ZERO);
        let (alpha, beta, residual) = fit_linear_phase(&one, 2, 6).unwrap();
        assert_eq!(alpha.turns(), 0.0);
        assert_eq!(beta.turns(), 0.0);
        assert!(residual < 1e-15);
    }

    #[test]
    fn error_constants_are_monotone() {
        let mut prev = 0.0;
        for s in 1..=4 {
            let k = recursion_error_constant(s);
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn report_covers_requested_orders() {
        let f = thue_morse();
        let rep = uniformity_report(&f, 3, 5, 16, 1 << 30).unwrap();
        assert_eq!(rep.norms.len(), 2);
        assert_eq!(rep.norms[0].s, 2);
        assert_eq!(rep.norms[1].s, 3);
        for nv in &rep.norms {
            assert!((0.0..=1.0 + 1e-12).contains(&nv.value));
        }
        assert!(rep.sup_linear.value <= 1.0);
    }
}
