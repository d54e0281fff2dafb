//! Sequence construction: q-multiplicative phase tables and digital
//! sequences evaluated by bit scans.
//!
//! A q-multiplicative sequence f with |f| = 1 satisfies
//! f(m + n) = f(m) f(n) whenever m < q^t and q^t divides n, and is
//! therefore determined by the values f(a q^t) for digits a and levels t.
//! [`QMultSeq`] stores exactly that table of phases; evaluation sums the
//! phases of the base-q digits mod 1, so multiplicativity holds by
//! construction.

use crate::phase::Phase;
use crate::{Error, Result};
use num_complex::Complex64;

/// How the phase table extends beyond its stored levels.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TailPolicy {
    /// f(a q^t) = 1 for all t past the table.
    Ones,
    /// Repeat the last stored row forever.
    RepeatLast,
    /// Cycle through the last `period` stored rows.
    Periodic { period: u32 },
}

/// Unit-modulus evaluation shared by every sequence family here.
pub trait Sequence: Sync {
    /// Phase of f(n) in turns.
    fn phase(&self, n: u64) -> Phase;

    fn value(&self, n: u64) -> Complex64 {
        self.phase(n).to_complex()
    }
}

/// A closure-backed sequence, handy for modified or synthetic inputs.
pub struct FnSeq<F>(pub F);

impl<F: Fn(u64) -> Phase + Sync> Sequence for FnSeq<F> {
    fn phase(&self, n: u64) -> Phase {
        (self.0)(n)
    }
}

/// A q-multiplicative sequence given by its phase table.
///
/// `row(t)[a]` is the phase of f(a q^t); row entries at digit 0 are 0 so
/// that f(0) = 1.
#[derive(Clone, Debug)]
pub struct QMultSeq {
    q: u32,
    levels: u32,
    // levels x q phases, row-major
    table: Vec<Phase>,
    tail: TailPolicy,
}

impl QMultSeq {
    pub fn from_table(q: u32, rows: Vec<Vec<f64>>, tail: TailPolicy) -> Result<QMultSeq> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!("base q must be >= 2, got {q}")));
        }
        if rows.is_empty() {
            return Err(Error::InvalidParameter("phase table needs at least one level".into()));
        }
        if let TailPolicy::Periodic { period } = tail {
            if period == 0 || period as usize > rows.len() {
                return Err(Error::InvalidParameter(format!(
                    "periodic tail of period {period} needs 1 <= period <= {} stored levels",
                    rows.len()
                )));
            }
        }
        let mut table = Vec::with_capacity(rows.len() * q as usize);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != q as usize {
                return Err(Error::InvalidParameter(format!(
                    "level {t} has {} phases, expected q = {q}",
                    row.len()
                )));
            }
            for (a, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "phase at level {t}, digit {a} is not finite"
                    )));
                }
                let p = Phase::new(x);
                if a == 0 && p.turns() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "digit 0 must carry phase 0 at every level, found {} at level {t}",
                        p.turns()
                    )));
                }
                table.push(p);
            }
        }
        Ok(QMultSeq { q, levels: rows.len() as u32, table, tail })
    }

    /// Strongly q-multiplicative: one row used at every level.
    /// `phases` are the phases of f(1), ..., f(q-1).
    pub fn strongly_multiplicative(q: u32, phases: &[f64]) -> Result<QMultSeq> {
        if q < 2 || phases.len() != q as usize - 1 {
            return Err(Error::InvalidParameter(format!(
                "strongly multiplicative base {q} needs exactly {} digit phases, got {}",
                q.saturating_sub(1),
                phases.len()
            )));
        }
        let mut row = vec![0.0];
        row.extend_from_slice(phases);
        QMultSeq::from_table(q, vec![row], TailPolicy::RepeatLast)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn tail(&self) -> TailPolicy {
        self.tail
    }

    /// Phase of f(a q^t), resolving the tail policy for t past the table.
    pub fn phase_at(&self, t: u32, a: u32) -> Phase {
        debug_assert!(a < self.q);
        let t = if t < self.levels {
            t
        } else {
            match self.tail {
                TailPolicy::Ones => return Phase::ZERO,
                TailPolicy::RepeatLast => self.levels - 1,
                TailPolicy::Periodic { period } => {
                    self.levels - period + (t - self.levels) % period
                }
            }
        };
        self.table[t as usize * self.q as usize + a as usize]
    }

    /// Phase of f(n): the digit phases of n summed mod 1.
    pub fn eval_phase(&self, n: u64) -> Phase {
        let q = self.q as u64;
        let mut acc = Phase::ZERO;
        let mut rest = n;
        let mut t = 0u32;
        while rest > 0 {
            let digit = (rest % q) as u32;
            acc = acc.add(self.phase_at(t, digit));
            rest /= q;
            t += 1;
        }
        acc
    }

    pub fn eval(&self, n: u64) -> Complex64 {
        self.eval_phase(n).to_complex()
    }

    /// The shifted sequence g(n) = f(q^l n).
    ///
    /// Row t of g is row t + l of f; all three tail policies are stable
    /// under dropping leading rows, so the policy carries over unchanged
    /// and g.eval_phase(n) equals f.eval_phase(q^l n) exactly.
    pub fn shift(&self, l: u32) -> QMultSeq {
        let rows = (0..self.levels)
            .map(|t| (0..self.q).map(|a| self.phase_at(t + l, a).turns()).collect())
            .collect();
        QMultSeq::from_table(self.q, rows, self.tail)
            .expect("shift of a valid table stays valid")
    }

    /// Mean of f(a q^t) over digits a at one level.
    pub fn level_mean(&self, t: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..self.q {
            acc += self.phase_at(t, a).to_complex();
        }
        acc / self.q as f64
    }
}

impl Sequence for QMultSeq {
    fn phase(&self, n: u64) -> Phase {
        self.eval_phase(n)
    }
}

/// Digital sequences defined by a pass over the base-q digits rather than
/// a phase table.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DigitalSeq {
    /// +-1 by the parity of occurrences of "11" in binary; base 2.
    RudinShapiro,
}

impl DigitalSeq {
    pub fn q(&self) -> u32 {
        match self {
            DigitalSeq::RudinShapiro => 2,
        }
    }
}

impl Sequence for DigitalSeq {
    fn phase(&self, n: u64) -> Phase {
        match self {
            DigitalSeq::RudinShapiro => {
                let pairs = (n & (n >> 1)).count_ones();
                if pairs % 2 == 1 {
                    Phase::new(0.5)
                } else {
                    Phase::ZERO
                }
            }
        }
    }
}

/// A built sequence of either kind.
#[derive(Clone, Debug)]
pub enum AnySequence {
    QMult(QMultSeq),
    Digital(DigitalSeq),
}

impl AnySequence {
    pub fn q(&self) -> u32 {
        match self {
            AnySequence::QMult(f) => f.q(),
            AnySequence::Digital(d) => d.q(),
        }
    }

    /// The q-multiplicative table, if this sequence has one. Operations
    /// that factor over digits require it.
    pub fn as_qmult(&self) -> Result<&QMultSeq> {
        match self {
            AnySequence::QMult(f) => Ok(f),
            AnySequence::Digital(_) => Err(Error::InvalidParameter(
                "operation needs a q-multiplicative phase table; this sequence is digital".into(),
            )),
        }
    }
}

impl Sequence for AnySequence {
    fn phase(&self, n: u64) -> Phase {
        match self {
            AnySequence::QMult(f) => f.phase(n),
            AnySequence::Digital(d) => d.phase(n),
        }
    }
}

/// Declarative description of a sequence, parseable from the CLI
/// mini-language (see [`SeqSpec::from_str`]).
#[derive(Clone, Debug, PartialEq)]
pub enum SeqSpec {
    ThueMorse,
    GenThueMorse { tau: f64 },
    DigitSumPhase { q: u32, alpha: f64 },
    DigitSumModQ { q: u32, p: u32, modulus: u32 },
    Strong { q: u32, phases: Vec<f64> },
    Random { q: u32, levels: u32, seed: u64 },
    Periodic { q: u32, p: u32 },
    RudinShapiro,
}

impl SeqSpec {
    pub fn build(&self) -> Result<AnySequence> {
        match self {
            SeqSpec::ThueMorse => Ok(AnySequence::QMult(QMultSeq::strongly_multiplicative(
                2,
                &[0.5],
            )?)),
            SeqSpec::GenThueMorse { tau } => Ok(AnySequence::QMult(
                QMultSeq::strongly_multiplicative(2, &[*tau])?,
            )),
            SeqSpec::DigitSumPhase { q, alpha } => {
                let phases: Vec<f64> = (1..*q).map(|a| a as f64 * alpha).collect();
                Ok(AnySequence::QMult(QMultSeq::strongly_multiplicative(*q, &phases)?))
            }
            SeqSpec::DigitSumModQ { q, p, modulus } => {
                if *modulus == 0 || p >= modulus {
                    return Err(Error::InvalidParameter(format!(
                        "digit-sum residue phase needs 0 <= p < Q, got p = {p}, Q = {modulus}"
                    )));
                }
                let phases: Vec<f64> =
                    (1..*q).map(|a| (a * p) as f64 / *modulus as f64).collect();
                Ok(AnySequence::QMult(QMultSeq::strongly_multiplicative(*q, &phases)?))
            }
            SeqSpec::Strong { q, phases } => Ok(AnySequence::QMult(
                QMultSeq::strongly_multiplicative(*q, phases)?,
            )),
            SeqSpec::Random { q, levels, seed } => {
                if *levels == 0 {
                    return Err(Error::InvalidParameter("random table needs levels >= 1".into()));
                }
                let mut rng = SplitMix64::new(*seed);
                let rows = (0..*levels)
                    .map(|_| {
                        let mut row = vec![0.0];
                        row.extend((1..*q).map(|_| rng.next_unit()));
                        row
                    })
                    .collect();
                Ok(AnySequence::QMult(QMultSeq::from_table(
                    *q,
                    rows,
                    TailPolicy::RepeatLast,
                )?))
            }
            SeqSpec::Periodic { q, p } => {
                if *q < 2 || *p >= q - 1 {
                    return Err(Error::InvalidParameter(format!(
                        "periodic sequence needs 0 <= p < q - 1, got p = {p}, q = {q}"
                    )));
                }
                // f(n) = e(n p / (q-1)): strongly q-multiplicative because
                // q^t = 1 mod (q-1).
                let phases: Vec<f64> =
                    (1..*q).map(|a| (a * p) as f64 / (*q - 1) as f64).collect();
                Ok(AnySequence::QMult(QMultSeq::strongly_multiplicative(*q, &phases)?))
            }
            SeqSpec::RudinShapiro => Ok(AnySequence::Digital(DigitalSeq::RudinShapiro)),
        }
    }
}

impl std::str::FromStr for SeqSpec {
    type Err = Error;

    /// Grammar: `name[:key=value{,key=value}]`, list values separated by `;`.
    ///
    /// Examples: `tm`, `gtm:tau=0.3`, `digitsum:q=3,alpha=0.414`,
    /// `dsmod:q=2,p=1,Q=3`, `strong:q=5,phases=0.2;0.4;0.6;0.8`,
    /// `random:q=2,levels=32,seed=7`, `periodic:q=3,p=1`, `rudin-shapiro`.
    fn from_str(s: &str) -> Result<SeqSpec> {
        let bad = |msg: String| Error::SpecParse(msg);
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let mut kv: Vec<(String, String)> = Vec::new();
        if let Some(args) = args {
            if args.is_empty() {
                return Err(bad(format!("empty argument list in '{s}'")));
            }
            for pair in args.split(',') {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got '{pair}'")))?;
                if v.is_empty() {
                    return Err(bad(format!("empty value for key '{k}'")));
                }
                kv.push((k.to_string(), v.to_string()));
            }
        }
        let mut taken = vec![false; kv.len()];
        let mut get = |key: &str| -> Option<String> {
            for (i, (k, v)) in kv.iter().enumerate() {
                if k == key && !taken[i] {
                    taken[i] = true;
                    return Some(v.clone());
                }
            }
            None
        };
        let parse_f64 = |key: &str, v: String| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| bad(format!("key '{key}' expects a real number, got '{v}'")))
        };
        let parse_u32 = |key: &str, v: String| -> Result<u32> {
            v.parse::<u32>()
                .map_err(|_| bad(format!("key '{key}' expects a nonnegative integer, got '{v}'")))
        };

        let spec = match name {
            "tm" => SeqSpec::ThueMorse,
            "gtm" => {
                let tau = get("tau").ok_or_else(|| bad("gtm needs tau".into()))?;
                SeqSpec::GenThueMorse { tau: parse_f64("tau", tau)? }
            }
            "digitsum" => {
                let q = get("q").ok_or_else(|| bad("digitsum needs q".into()))?;
                let alpha = get("alpha").ok_or_else(|| bad("digitsum needs alpha".into()))?;
                SeqSpec::DigitSumPhase {
                    q: parse_u32("q", q)?,
                    alpha: parse_f64("alpha", alpha)?,
                }
            }
            "dsmod" => {
                let q = get("q").ok_or_else(|| bad("dsmod needs q".into()))?;
                let p = get("p").ok_or_else(|| bad("dsmod needs p".into()))?;
                let modulus = get("Q").ok_or_else(|| bad("dsmod needs Q".into()))?;
                SeqSpec::DigitSumModQ {
                    q: parse_u32("q", q)?,
                    p: parse_u32("p", p)?,
                    modulus: parse_u32("Q", modulus)?,
                }
            }
            "strong" => {
                let q = get("q").ok_or_else(|| bad("strong needs q".into()))?;
                let phases = get("phases").ok_or_else(|| bad("strong needs phases".into()))?;
                let phases = phases
                    .split(';')
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|_| bad(format!("bad phase '{x}' in list")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                SeqSpec::Strong { q: parse_u32("q", q)?, phases }
            }
            "random" => {
                let q = get("q").ok_or_else(|| bad("random needs q".into()))?;
                let levels = get("levels").ok_or_else(|| bad("random needs levels".into()))?;
                let seed = get("seed").ok_or_else(|| bad("random needs seed".into()))?;
                SeqSpec::Random {
                    q: parse_u32("q", q)?,
                    levels: parse_u32("levels", levels)?,
                    seed: seed
                        .parse::<u64>()
                        .map_err(|_| bad(format!("key 'seed' expects an integer, got '{seed}'")))?,
                }
            }
            "periodic" => {
                let q = get("q").ok_or_else(|| bad("periodic needs q".into()))?;
                let p = get("p").ok_or_else(|| bad("periodic needs p".into()))?;
                SeqSpec::Periodic { q: parse_u32("q", q)?, p: parse_u32("p", p)? }
            }
            "rudin-shapiro" => SeqSpec::RudinShapiro,
            other => return Err(bad(format!("unknown sequence family '{other}'"))),
        };
        if let Some(i) = taken.iter().position(|t| !t) {
            return Err(bad(format!("unknown key '{}' for family '{name}'", kv[i].0)));
        }
        Ok(spec)
    }
}

/// Base-q digit sum of n.
pub fn sum_of_digits(q: u32, n: u64) -> u32 {
    assert!(q >= 2, "digit sums need base q >= 2");
    let q = q as u64;
    let mut s = 0u32;
    let mut rest = n;
    while rest > 0 {
        s += (rest % q) as u32;
        rest /= q;
    }
    s
}

/// SplitMix64: the standard 64-bit mixing generator. Used wherever a
/// seeded stream must stay reproducible across platforms and releases.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in [0, n).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Multiply-shift bound; bias is negligible for the ranges used here.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
