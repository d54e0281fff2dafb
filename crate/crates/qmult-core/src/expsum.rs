//! Linear and polynomial phase correlations: direct sums, the per-digit
//! product factorization, sup-over-alpha searches, Cesaro means, and
//! decay-exponent fits.
//!
//! For a q-multiplicative f and N = q^K the correlation against e(n alpha)
//! splits into one factor per digit position,
//!
//!   |E_{n<q^K} f(n) e(n alpha)| = prod_{l<K} |E_{a<q} f(a q^l) e(a q^l alpha)|,
//!
//! because the digits of n < q^K range independently. Everything in this
//! module leans on that product: fast evaluation, the digit-by-digit sup
//! search, and the Parseval floor q^{-K/2} for the best digit choice.

use crate::phase::{unit, FixedTurn, Phase};
use crate::seq::{QMultSeq, Sequence};
use crate::sum::mean_complex;
use crate::{checked_pow, Error, Result};
use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Polynomial phase p(n) = sum_j c_j n^j with coefficients in turns.
///
/// Coefficients are quantized to 64-bit fixed point so that Horner
/// evaluation is exact modulo 1; integer multiples of a quantized
/// coefficient never drift, no matter how large n gets.
#[derive(Clone, Debug)]
pub struct PolyPhase {
    coeffs: Vec<FixedTurn>,
}

impl PolyPhase {
    /// Coefficients in ascending degree: (c_0, c_1, ..., c_d), turns.
    pub fn new(coeffs_turns: &[f64]) -> Result<PolyPhase> {
        if coeffs_turns.is_empty() {
            return Err(Error::InvalidParameter(
                "phase polynomial needs at least the constant coefficient".into(),
            ));
        }
        if let Some(c) = coeffs_turns.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "phase polynomial coefficient {c} is not finite"
            )));
        }
        Ok(PolyPhase { coeffs: coeffs_turns.iter().map(|&c| FixedTurn::from_turns(c)).collect() })
    }

    /// p(n) = alpha n.
    pub fn linear(alpha: Phase) -> PolyPhase {
        PolyPhase::new(&[0.0, alpha.turns()]).expect("two finite coefficients")
    }

    /// p = 0.
    pub fn zero() -> PolyPhase {
        PolyPhase::new(&[0.0]).expect("one finite coefficient")
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs_turns(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_turns()).collect()
    }

    /// p(n) mod 1, exact over the quantized coefficients (Horner with
    /// wrapping fixed-point multiplication).
    pub fn eval(&self, n: u64) -> Phase {
        let mut acc = *self.coeffs.last().expect("nonempty");
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul_u64(n).add(*c);
        }
        Phase::new(acc.to_turns())
    }
}

/// E_{n<N} f(n) e(p(n)) by direct summation over the deterministic
/// reduction tree.
pub fn phase_correlation<F: Sequence + ?Sized>(
    f: &F,
    p: &PolyPhase,
    n_terms: u64,
) -> Result<Complex64> {
    if n_terms == 0 {
        return Err(Error::InvalidParameter("correlation needs at least one term".into()));
    }
    Ok(mean_complex(0, n_terms, |n| unit(f.phase(n).add(p.eval(n)).turns())))
}

/// E_{n<N} f(n + M) e(p(n)) by direct summation.
pub fn shifted_correlation<F: Sequence + ?Sized>(
    f: &F,
    m_offset: u64,
    p: &PolyPhase,
    n_terms: u64,
) -> Result<Complex64> {
    if n_terms == 0 {
        return Err(Error::InvalidParameter("correlation needs at least one term".into()));
    }
    if m_offset.checked_add(n_terms).is_none() {
        return Err(Error::InvalidParameter("offset plus length overflows u64".into()));
    }
    Ok(mean_complex(0, n_terms, |n| unit(f.phase(n + m_offset).add(p.eval(n)).turns())))
}

/// One digit-position factor |E_{a<q} f(a q^l) e(a z)| where z stands for
/// q^l alpha mod 1, in turns.
fn level_factor(f: &QMultSeq, l: u32, z: f64) -> f64 {
    let q = f.q();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..q {
        acc += unit(f.phase_at(l, a).turns() + a as f64 * z);
    }
    acc.norm() / q as f64
}

/// prod_{l<K} |E_{a<q} f(a q^l) e(a q^l alpha)|, the factorized form of
/// |E_{n<q^K} f(n) e(n alpha)|. O(K q) time.
pub fn linear_correlation_product(f: &QMultSeq, alpha: Phase, k_levels: u32) -> Result<f64> {
    let x = FixedTurn::from_turns(alpha.turns());
    let q = f.q();
    let mut prod = 1.0f64;
    for l in 0..k_levels {
        let ql = checked_pow(q, l)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..q {
            let turn = x.mul_u64(a as u64 * ql).to_turns();
            acc += unit(f.phase_at(l, a).turns() + turn);
        }
        prod *= acc.norm() / q as f64;
    }
    Ok(prod)
}

/// prod_{j<n} |cos pi (2^j alpha + tau)|: the closed trigonometric form of
/// |E_{k<2^n} e(tau s_2(k)) e(k alpha)|. The doubling runs in fixed point,
/// so deep levels keep full precision mod 1.
pub fn trig_product_gtm(tau: Phase, alpha: Phase, n_levels: u32) -> f64 {
    let mut x = FixedTurn::from_turns(alpha.turns());
    let t = tau.turns();
    let mut prod = 1.0f64;
    for _ in 0..n_levels {
        prod *= (PI * (x.to_turns() + t)).cos().abs();
        x = x.add(x);
    }
    prod
}

/// Result of a sup-over-alpha search. `value` is a certified lower bound
/// on sup_alpha of the K-level correlation product: it is the product
/// actually attained at `alpha`.
#[derive(Clone, Debug)]
pub struct SupResult {
    pub alpha: Phase,
    pub value: f64,
    /// True when the search certified the exact maximum over the q-adic
    /// grid of denominator q^K (the reported value may exceed that grid
    /// maximum thanks to tail refinement inside the winning cylinder).
    pub exact_on_grid: bool,
    pub expansions: u64,
    /// The K base-q digits of the winning cylinder, most significant
    /// first; `alpha` lies inside that cylinder.
    pub digits: Vec<u8>,
}

// Tail refinement within the winning cylinder: grid resolution and
// golden-section depth. Inside one cylinder the level-l factor sweeps
// only q^{l-K} of a turn, so the slice is close to unimodal and a coarse
// grid plus golden-section recovers the interior maximum.
const TAIL_GRID: u32 = 24;
const TAIL_GOLDEN_ITERS: u32 = 40;

// Search node: digits are chosen deepest position first (d_K, d_{K-1}, ...)
// because factor l depends only on digits strictly below position l. z is
// the tail value 0.d_{K-i+1}...d_K and score the product of the factors
// completed so far. Factors lie in [0,1], so score never increases along a
// path and best-first pops the grid maximum first.
#[derive(Clone)]
struct SupNode {
    score: f64,
    digits: Vec<u8>,
    z: f64,
}

impl PartialEq for SupNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for SupNode {}
impl PartialOrd for SupNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SupNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // Scores are finite products of absolute values: never NaN.
        self.score
            .partial_cmp(&other.score)
            .expect("scores are never NaN")
            .then_with(|| other.digits.cmp(&self.digits))
    }
}

/// Product over the K levels for alpha = 0.d_1...d_K + tail * q^{-K},
/// digits passed deepest first (d_K first), tail in [0, 1). Returns the
/// product and alpha itself (the fully folded tail value).
fn eval_digit_string(f: &QMultSeq, k_levels: u32, deep_first: &[u8], tail: f64) -> (f64, f64) {
    let q = f.q() as f64;
    let mut z = tail;
    let mut prod = 1.0f64;
    let mut level = k_levels;
    for &d in deep_first {
        level -= 1;
        z = (d as f64 + z) / q;
        prod *= level_factor(f, level, z);
    }
    (prod, z)
}

/// Complete a partial digit string by the immediate-factor greedy rule:
/// at each remaining position take the digit with the largest next factor,
/// lowest digit on ties. Memoryless, so the completion of a node passes
/// through the completion of its best child.
fn greedy_complete(f: &QMultSeq, k_levels: u32, node: &SupNode) -> Vec<u8> {
    let q = f.q();
    let mut digits = node.digits.clone();
    let mut z = node.z;
    while digits.len() < k_levels as usize {
        let level = k_levels - 1 - digits.len() as u32;
        let mut best_d = 0u8;
        let mut best_v = f64::NEG_INFINITY;
        for d in 0..q {
            let v = level_factor(f, level, (d as f64 + z) / q as f64);
            if v > best_v {
                best_v = v;
                best_d = d as u8;
            }
        }
        digits.push(best_d);
        z = (best_d as f64 + z) / q as f64;
    }
    digits
}

/// Maximize the product over real alpha inside the cylinder
/// [0.d_1...d_K, 0.d_1...d_K + q^{-K}): coarse tail grid, then
/// golden-section around the best cell. The tail 0 entry reproduces the
/// discrete grid value, so refinement never loses to it.
fn refine_in_cylinder(f: &QMultSeq, k_levels: u32, deep_first: &[u8]) -> (f64, f64) {
    let mut best_t = 0.0f64;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..TAIL_GRID {
        let t = i as f64 / TAIL_GRID as f64;
        let (v, _) = eval_digit_string(f, k_levels, deep_first, t);
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    let h = 1.0 / TAIL_GRID as f64;
    let (t, v) = golden_max(
        |t| eval_digit_string(f, k_levels, deep_first, t.clamp(0.0, 1.0)).0,
        (best_t - h).max(0.0),
        (best_t + h).min(1.0),
        TAIL_GOLDEN_ITERS,
    );
    let t_star = if v > best_v { t.clamp(0.0, 1.0) } else { best_t };
    let (value, alpha) = eval_digit_string(f, k_levels, deep_first, t_star);
    (value, alpha)
}

/// Sup of the K-level correlation product over alpha, searched digit by
/// digit from the deepest position.
///
/// Best-first expansion with budget beam * K: since every factor is at
/// most 1, the first full-depth node popped is the exact maximum over
/// q-adic alpha of denominator q^K, and beam = q^K always reaches that
/// point. On exhaustion the result is the best greedy completion of the
/// frontier. Either way every candidate is refined over the real tail of
/// its cylinder, and because completions are memoryless and tail 0 keeps
/// the discrete value, the reported value never decreases as the budget
/// grows.
pub fn sup_linear_correlation(f: &QMultSeq, k_levels: u32, beam: u64) -> Result<SupResult> {
    if beam == 0 {
        return Err(Error::InvalidParameter("beam width must be at least 1".into()));
    }
    if k_levels == 0 {
        return Ok(SupResult {
            alpha: Phase::ZERO,
            value: 1.0,
            exact_on_grid: true,
            expansions: 0,
            digits: Vec::new(),
        });
    }
    let q = f.q();
    let budget = beam.saturating_mul(k_levels as u64);
    let mut heap = BinaryHeap::new();
    heap.push(SupNode { score: 1.0, digits: Vec::new(), z: 0.0 });
    let mut expansions = 0u64;
    let mut exact = false;
    let mut candidates: Vec<SupNode> = Vec::new();
    while let Some(node) = heap.pop() {
        if node.digits.len() == k_levels as usize {
            // Exact grid maximum: every other node's completions score
            // at most this node's score.
            candidates.push(node);
            exact = true;
            break;
        }
        if expansions >= budget {
            heap.push(node);
            break;
        }
        expansions += 1;
        let level = k_levels - 1 - node.digits.len() as u32;
        for d in 0..q {
            let z = (d as f64 + node.z) / q as f64;
            let mut digits = node.digits.clone();
            digits.push(d as u8);
            heap.push(SupNode { score: node.score * level_factor(f, level, z), digits, z });
        }
    }
    candidates.extend(heap.into_vec());

    let mut best_value = f64::NEG_INFINITY;
    let mut best_alpha = 0.0f64;
    let mut best_digits: Vec<u8> = Vec::new();
    for cand in &candidates {
        let deep_first = greedy_complete(f, k_levels, cand);
        let (value, alpha) = refine_in_cylinder(f, k_levels, &deep_first);
        if value > best_value {
            best_value = value;
            best_alpha = alpha;
            best_digits = deep_first.iter().rev().copied().collect();
        }
    }
    Ok(SupResult {
        alpha: Phase::new(best_alpha),
        value: best_value.min(1.0),
        exact_on_grid: exact,
        expansions,
        digits: best_digits,
    })
}

/// The pure greedy pass (no frontier): digits chosen most significant
/// factor first, with the per-position factors recorded. Each factor is
/// at least q^{-1/2}: the mean square of the q children of any node is
/// exactly 1/q, so the best child is at least the root mean square.
#[derive(Clone, Debug)]
pub struct GreedyTrace {
    pub alpha: Phase,
    pub value: f64,
    /// Factor gained at each step, deepest position first.
    pub factors: Vec<f64>,
    /// Digits of alpha, most significant first.
    pub digits: Vec<u8>,
}

pub fn greedy_linear_search(f: &QMultSeq, k_levels: u32) -> GreedyTrace {
    let root = SupNode { score: 1.0, digits: Vec::new(), z: 0.0 };
    let deep_first = greedy_complete(f, k_levels, &root);
    let q = f.q() as f64;
    let mut z = 0.0f64;
    let mut level = k_levels;
    let mut factors = Vec::with_capacity(k_levels as usize);
    let mut value = 1.0f64;
    for &d in &deep_first {
        level -= 1;
        z = (d as f64 + z) / q;
        let v = level_factor(f, level, z);
        factors.push(v);
        value *= v;
    }
    GreedyTrace {
        alpha: Phase::new(z),
        value,
        factors,
        digits: deep_first.iter().rev().copied().collect(),
    }
}

/// Exhaustive maximum of the K-level product over alpha = j / grid_points.
/// Independent of the digit search; kept as the oracle for it. The tail
/// values q^l alpha mod 1 are computed in exact integer arithmetic.
pub fn grid_sup_linear(f: &QMultSeq, k_levels: u32, grid_points: u64) -> Result<(Phase, f64)> {
    if grid_points == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    let q = f.q() as u128;
    let m = grid_points as u128;
    let mut best = (Phase::ZERO, f64::NEG_INFINITY);
    for j in 0..grid_points {
        let mut r = j as u128;
        let mut prod = 1.0f64;
        for l in 0..k_levels {
            prod *= level_factor(f, l, r as f64 / m as f64);
            r = r * q % m;
        }
        if prod > best.1 {
            best = (Phase::new(j as f64 / grid_points as f64), prod);
        }
    }
    Ok(best)
}

/// Lower bound for the polynomial-phase sup at fixed degree: coordinate
/// descent over coefficient space with a grid pass plus golden-section
/// refinement per coordinate. The objective is non-convex; only the
/// attained value is claimed. The constant coefficient is pinned to 0
/// since it does not move |E f(n) e(p(n))|.
pub fn sup_poly_correlation<F: Sequence + ?Sized>(
    f: &F,
    degree: u32,
    n_terms: u64,
    grid_density: u32,
) -> Result<(PolyPhase, f64)> {
    if degree == 0 {
        return Err(Error::InvalidParameter("polynomial sup needs degree >= 1".into()));
    }
    if grid_density < 2 {
        return Err(Error::InvalidParameter("grid density must be at least 2".into()));
    }
    if n_terms == 0 {
        return Err(Error::InvalidParameter("correlation needs at least one term".into()));
    }
    let mut coeffs = vec![0.0f64; degree as usize + 1];
    let objective = |coeffs: &[f64]| -> f64 {
        let p = PolyPhase::new(coeffs).expect("finite coefficients");
        phase_correlation(f, &p, n_terms).expect("n_terms >= 1").norm()
    };
    let mut best = objective(&coeffs);
    const PASSES: usize = 3;
    for _ in 0..PASSES {
        let before = best;
        for j in 1..=degree as usize {
            // Grid pass over this coordinate.
            let mut grid_best = (coeffs[j], best);
            for i in 0..grid_density {
                let c = i as f64 / grid_density as f64;
                let mut trial = coeffs.clone();
                trial[j] = c;
                let v = objective(&trial);
                if v > grid_best.1 {
                    grid_best = (c, v);
                }
            }
            // Golden-section refinement around the winner.
            let h = 1.0 / grid_density as f64;
            let (c, v) = golden_max(
                |c| {
                    let mut trial = coeffs.clone();
                    trial[j] = c;
                    objective(&trial)
                },
                grid_best.0 - h,
                grid_best.0 + h,
                48,
            );
            if v > grid_best.1 {
                grid_best = (c, v);
            }
            coeffs[j] = grid_best.0;
            best = grid_best.1;
        }
        if best - before < 1e-9 {
            break;
        }
    }
    Ok((PolyPhase::new(&coeffs)?, best.min(1.0)))
}

/// Golden-section maximization on [lo, hi]; deterministic iteration count.
pub(crate) fn golden_max<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, iters: u32) -> (f64, f64) {
    const INV_PHI: f64 = 0.6180339887498949;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..iters {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    if gc > gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// The Delange main term at N = q^L: prod_{t<L} E_{a<q} f(a q^t). For a
/// q-multiplicative f this equals E_{n<q^L} f(n) exactly, because the
/// digits of n < q^L range independently and f factors over them.
pub fn cesaro_mean(f: &QMultSeq, l_levels: u32) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for t in 0..l_levels {
        prod *= f.level_mean(t);
    }
    prod
}

/// Partial sum sum_{t<T} (1 - Re E_{a<q} f(a q^t)). Divergence of this
/// series is what forces the Cesaro mean to vanish; callers inspect the
/// growth across T.
pub fn delange_criterion(f: &QMultSeq, t_levels: u32) -> Result<f64> {
    if t_levels == 0 {
        return Err(Error::InvalidParameter("criterion needs at least one level".into()));
    }
    let mut acc = 0.0f64;
    for t in 0..t_levels {
        acc += 1.0 - f.level_mean(t).re;
    }
    Ok(acc)
}

/// max_x |cos pi(x + tau) cos pi(2x + tau)| over a fine grid with local
/// golden-section refinement. Strictly below 1 for tau strictly inside
/// (0, 1); equal to 1 at tau = 0.
pub fn mrs_factor_bound(tau: Phase) -> f64 {
    let t = tau.turns();
    let g = |x: f64| ((PI * (x + t)).cos() * (PI * (2.0 * x + t)).cos()).abs();
    // The product has period 2 in x; scan it at better than 2^16 points
    // per unit, then refine around the best cell.
    const GRID: u32 = 1 << 17;
    let step = 2.0 / GRID as f64;
    let mut best = (0.0f64, f64::NEG_INFINITY);
    for i in 0..GRID {
        let x = i as f64 * step;
        let v = g(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (_, refined) = golden_max(&g, best.0 - step, best.0 + step, 60);
    refined.max(best.1).min(1.0)
}

/// Closed form for the exponential growth rate of the two-level cosine
/// product, valid for tau in (0.43, 0.57):
/// beta(tau) = (1/2) ln |cos pi(1/3 + tau) cos pi(2/3 + tau)|.
/// Natural logarithm; the decay exponent of the associated correlation is
/// 1 + beta(tau)/ln 2.
pub fn beta_closed_form(tau: Phase) -> Result<f64> {
    let t = tau.turns();
    if !(t > 0.43 && t < 0.57) {
        return Err(Error::InvalidParameter(format!(
            "closed form is valid for tau in (0.43, 0.57), got {t}"
        )));
    }
    let prod = ((PI * (1.0 / 3.0 + t)).cos() * (PI * (2.0 / 3.0 + t)).cos()).abs();
    Ok(0.5 * prod.ln())
}

/// How the per-scale sup over alpha is carried out.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AlphaSearch {
    /// Digit search with the given beam width.
    Beam { width: u64 },
    /// Exhaustive scan of alpha = j/points.
    Grid { points: u64 },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FitMethod {
    Direct,
    Product,
    BeamSearch,
    Grid,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FitMethod::Direct => "direct",
            FitMethod::Product => "product",
            FitMethod::BeamSearch => "beam",
            FitMethod::Grid => "grid",
        };
        out.write_str(s)
    }
}

/// Scale-by-scale sup values with a fitted decay exponent.
#[derive(Clone, Debug)]
pub struct NormReport {
    /// (N, value) pairs with N = q^L.
    pub scales: Vec<(u64, f64)>,
    pub fitted_exponent: f64,
    pub fit_residual: f64,
    pub method: FitMethod,
}

/// One measured scale of a sup-correlation sweep.
#[derive(Clone, Debug)]
pub struct ScalePoint {
    pub level: u32,
    pub n: u64,
    pub value: f64,
    pub alpha: Phase,
}

/// Sup-correlation values at N = q^L for L in [l_min, l_max].
pub fn gelfond_scale_values(
    f: &QMultSeq,
    search: AlphaSearch,
    l_min: u32,
    l_max: u32,
) -> Result<Vec<ScalePoint>> {
    if l_max < l_min {
        return Err(Error::InvalidParameter(format!(
            "level range is empty: {l_min} > {l_max}"
        )));
    }
    if let AlphaSearch::Grid { points } = search {
        if points == 0 || points > 1 << 22 {
            return Err(Error::InvalidParameter(
                "grid search supports 1 to 2^22 points".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity((l_max - l_min + 1) as usize);
    for l in l_min..=l_max {
        let n = checked_pow(f.q(), l)?;
        let (alpha, value) = match search {
            AlphaSearch::Beam { width } => {
                let r = sup_linear_correlation(f, l, width)?;
                (r.alpha, r.value)
            }
            AlphaSearch::Grid { points } => grid_sup_linear(f, l, points)?,
        };
        out.push(ScalePoint { level: l, n, value, alpha });
    }
    Ok(out)
}

/// Fit the decay exponent gamma in sup_alpha |E_{n<N} f(n) e(n alpha)|
/// ~ N^{gamma - 1}: least squares slope of ln(N * value) against ln N.
/// Needs at least 3 levels; 5 or more starting at q^6 gives stable fits.
///
/// A true sup is at least q^{-L/2} by Parseval, so scale values below
/// q^{-L} can only come from total cancellation (a degenerate search that
/// pinned alpha onto a zero of the product). Those count as exact zeros;
/// if fewer than two scales survive, the exponent is a -inf sentinel.
pub fn fit_gelfond_exponent(
    f: &QMultSeq,
    search: AlphaSearch,
    l_min: u32,
    l_max: u32,
) -> Result<NormReport> {
    if l_max < l_min || l_max - l_min + 1 < 3 {
        return Err(Error::InvalidParameter(
            "exponent fit needs at least 3 levels".into(),
        ));
    }
    let points = gelfond_scale_values(f, search, l_min, l_max)?;
    let method = match search {
        AlphaSearch::Beam { .. } => FitMethod::BeamSearch,
        AlphaSearch::Grid { .. } => FitMethod::Grid,
    };
    Ok(fit_scale_points(&points, method))
}

/// The fit half of [`fit_gelfond_exponent`], for callers that already
/// hold the measured scale points.
pub fn fit_scale_points(points: &[ScalePoint], method: FitMethod) -> NormReport {
    let scales: Vec<(u64, f64)> = points.iter().map(|p| (p.n, p.value)).collect();
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.value > 1.0 / p.n as f64)
        .map(|p| {
            let ln_n = (p.n as f64).ln();
            (ln_n, ln_n + p.value.ln())
        })
        .collect();
    if usable.len() < 2 {
        return NormReport {
            scales,
            fitted_exponent: f64::NEG_INFINITY,
            fit_residual: 0.0,
            method,
        };
    }
    let (slope, _, residual) = least_squares_line(&usable);
    NormReport { scales, fitted_exponent: slope, fit_residual: residual, method }
}

/// Least squares line through (x, y) pairs: (slope, intercept, rms residual).
fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mse = pts
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum::<f64>()
        / n;
    (slope, intercept, mse.sqrt())
}
