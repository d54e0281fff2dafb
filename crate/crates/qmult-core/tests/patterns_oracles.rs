//! Progression counting checked against a naive reference loop, plus
//! the positivity, growth, and rotation-average examples.

use qmult_core::patterns::{
    count_ap_cells, count_ap_patterns, weighted_birkhoff_demo, PatternKind, PatternSpec,
};
use qmult_core::seq::{sum_of_digits, FnSeq, SplitMix64};
use qmult_core::{Phase, SeqSpec};

const BUDGET: u64 = 1 << 32;

/// Reference counter: literal loops, per-element digit sums recomputed
/// from scratch, no tables and no partitioning.
fn naive_count(spec: &PatternSpec, n: u64) -> u64 {
    let k = spec.k() as u64;
    let accept = |j: usize, x: u64| -> bool {
        let s = sum_of_digits(spec.q(), x);
        match spec.kind() {
            PatternKind::ModResidues { modulus, residues } => s % modulus == residues[j],
            PatternKind::IrrationalCells { alpha, intervals } => {
                let v = (alpha * s as f64).rem_euclid(1.0);
                let (lo, hi) = intervals[j];
                lo <= v && v < hi
            }
        }
    };
    if k == 1 {
        return (0..n).filter(|&x| accept(0, x)).count() as u64;
    }
    let mut count = 0;
    for m in 1..n {
        for base in 0..n {
            if base + (k - 1) * m < n && (0..k).all(|j| accept(j as usize, base + j * m)) {
                count += 1;
            }
        }
    }
    count
}

fn random_spec(rng: &mut SplitMix64) -> PatternSpec {
    let q = [2, 3, 5, 10][rng.next_below(4) as usize];
    let k = 1 + rng.next_below(4) as usize;
    if rng.next_u64() % 2 == 0 {
        let modulus = 1 + rng.next_below(6) as u32;
        let residues = (0..k).map(|_| rng.next_below(modulus as u64) as u32).collect();
        PatternSpec::mod_residues(q, modulus, residues).unwrap()
    } else {
        let alpha = rng.next_unit() * 3.0;
        let intervals = (0..k)
            .map(|_| {
                let lo = rng.next_unit() * 0.9;
                let hi = lo + (1.0 - lo) * (0.05 + 0.95 * rng.next_unit());
                (lo, hi.min(1.0))
            })
            .collect();
        PatternSpec::irrational_cells(q, alpha, intervals).unwrap()
    }
}

#[test]
fn optimized_counter_matches_a_naive_reference() {
    let mut rng = SplitMix64::new(0x9e3779b97f4a7c15);
    for case in 0..20 {
        let spec = random_spec(&mut rng);
        let n = 1 + rng.next_below(1 << 9);
        let fast = match spec.kind() {
            PatternKind::ModResidues { .. } => count_ap_patterns(&spec, n, BUDGET).unwrap(),
            PatternKind::IrrationalCells { .. } => count_ap_cells(&spec, n, BUDGET).unwrap(),
        };
        let slow = naive_count(&spec, n);
        assert_eq!(fast.count, slow, "case {case}: {spec:?} at N = {n}");
        assert!(fast.count <= n * n);
        assert!((fast.density - fast.count as f64 / (n * n) as f64).abs() < 1e-15);
    }
}

#[test]
fn every_residue_triple_appears_at_scale() {
    let n = 1 << 10;
    for r0 in 0..3 {
        for r1 in 0..3 {
            for r2 in 0..3 {
                let spec = PatternSpec::mod_residues(2, 3, vec![r0, r1, r2]).unwrap();
                let report = count_ap_patterns(&spec, n, BUDGET).unwrap();
                assert!(
                    report.count >= 1,
                    "triple ({r0},{r1},{r2}) missing below {n}"
                );
            }
        }
    }
}

#[test]
fn density_is_two_point_stable() {
    let spec = PatternSpec::mod_residues(2, 3, vec![0, 1, 2]).unwrap();
    let d: Vec<f64> = [1u64 << 9, 1 << 10, 1 << 11]
        .iter()
        .map(|&n| count_ap_patterns(&spec, n, BUDGET).unwrap().density)
        .collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }
    // tighter at the larger pair: quadratic growth has set in
    assert!((d[1] / d[2] - 1.0).abs() <= 0.2, "{} vs {}", d[1], d[2]);
}

#[test]
fn full_circle_cells_count_every_progression_at_each_length() {
    for k in 2u64..=4 {
        let n = 200u64;
        let spec =
            PatternSpec::irrational_cells(3, 2f64.sqrt(), vec![(0.0, 1.0); k as usize]).unwrap();
        let report = count_ap_cells(&spec, n, BUDGET).unwrap();
        let expect: u64 = (1..=(n - 1) / (k - 1)).map(|m| n - (k - 1) * m).sum();
        assert_eq!(report.count, expect, "k = {k}");
    }
}

#[test]
fn golden_ratio_half_cells_are_populated() {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let spec =
        PatternSpec::irrational_cells(2, golden, vec![(0.0, 0.5), (0.5, 1.0)]).unwrap();
    let report = count_ap_cells(&spec, 1 << 10, BUDGET).unwrap();
    assert!(report.count > 0);
    assert!(!report.is_empty());
}

#[test]
fn linear_rotation_average_decays_like_a_geometric_tail() {
    let one = FnSeq(|_| Phase::ZERO);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let ladder =
        weighted_birkhoff_demo(&one, &[0, 1], Phase::new(golden), Phase::new(0.11), 1 << 14)
            .unwrap();
    // partial geometric sums are bounded, so averages fall like 1/N'
    for w in ladder.windows(2).skip(4) {
        let (na, va) = w[0];
        let (nb, vb) = w[1];
        assert!(
            vb.norm() <= 2.0 * va.norm() * (na as f64 / nb as f64) + 1e-9,
            "no decay between {na} and {nb}"
        );
    }
    assert!(ladder.last().unwrap().1.norm() < 1e-2);
}

#[test]
fn squared_rotation_dampens_thue_morse_averages() {
    let tm: SeqSpec = "tm".parse().unwrap();
    let tm = tm.build().unwrap();
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let ladder =
        weighted_birkhoff_demo(&tm, &[0, 0, 1], Phase::new(golden), Phase::ZERO, 1 << 16)
            .unwrap();
    let at = |target: u64| {
        ladder
            .iter()
            .find(|&&(np, _)| np == target)
            .map(|&(_, v)| v.norm())
            .unwrap()
    };
    assert!(at(1 << 16) < at(1 << 8), "{} vs {}", at(1 << 16), at(1 << 8));
}
