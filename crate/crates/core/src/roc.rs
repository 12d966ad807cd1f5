//! Empirical ROC curves, AUC, and the exact area between two ROC curves.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::ScoredDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Monotone piecewise-linear curve from (0,0) to (1,1) in (FPR, TPR) space.
///
/// Several consecutive points may share an FPR (a vertical run); the curve's
/// value there is taken as the highest TPR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    /// Checks the curve invariants: starts at (0,0), ends at (1,1), both
    /// coordinates nondecreasing, no repeated consecutive point.
    pub fn new(points: Vec<RocPoint>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidCurve(m.to_string()));
        let (Some(first), Some(last)) = (points.first(), points.last()) else {
            return bad("no points");
        };
        if (first.fpr, first.tpr) != (0.0, 0.0) {
            return bad("first point is not (0,0)");
        }
        if (last.fpr, last.tpr) != (1.0, 1.0) {
            return bad("last point is not (1,1)");
        }
        for w in points.windows(2) {
            if !(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr) {
                return bad("coordinates decrease");
            }
            if w[1] == w[0] {
                return bad("repeated consecutive point");
            }
        }
        Ok(Self { points })
    }

    /// The chance diagonal.
    pub fn diagonal() -> Self {
        Self {
            points: vec![RocPoint { fpr: 0.0, tpr: 0.0 }, RocPoint { fpr: 1.0, tpr: 1.0 }],
        }
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
            .sum()
    }

    /// TPR at `fpr` by linear interpolation; see [`interpolate_tpr`].
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        interpolate_tpr(self, fpr)
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InputLength(scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Empirical ROC curve: one vertex per distinct score, thresholds descending.
/// Tied scores move the curve along a single (possibly diagonal) segment.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let order = descending(scores);
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let block_end = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if block_end {
            points.push(RocPoint {
                fpr: fp as f64 / neg as f64,
                tpr: tp as f64 / pos as f64,
            });
        }
    }
    Ok(RocCurve { points })
}

/// Area under the ROC curve as the Mann-Whitney statistic:
/// `(#{pos > neg} + 0.5 * #{pos == neg}) / (n_pos * n_neg)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Doubled pair count keeps the tie half-credit in integers.
    let mut twice: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let s = scores[order[start]];
        let mut end = start;
        let (mut p, mut n) = (0u128, 0u128);
        while end < order.len() && scores[order[end]] == s {
            if labels[order[end]] {
                p += 1;
            } else {
                n += 1;
            }
            end += 1;
        }
        twice += 2 * p * neg_below + p * n;
        neg_below += n;
        start = end;
    }
    Ok(twice as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Distinct-FPR breakpoint of a curve: lowest and highest TPR reached at `fpr`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Knot {
    fpr: f64,
    lo: f64,
    hi: f64,
}

fn knots_into(points: &[RocPoint], out: &mut Vec<Knot>) {
    out.clear();
    for p in points {
        match out.last_mut() {
            Some(k) if k.fpr == p.fpr => k.hi = p.tpr,
            _ => out.push(Knot {
                fpr: p.fpr,
                lo: p.tpr,
                hi: p.tpr,
            }),
        }
    }
}

/// Linear piece of a curve between consecutive knots, from the top of the
/// left knot to the bottom of the right knot.
#[inline]
fn piece_value(left: &Knot, right: &Knot, f: f64) -> f64 {
    if f <= left.fpr {
        left.hi
    } else if f >= right.fpr {
        right.lo
    } else {
        left.hi + (right.lo - left.hi) * ((f - left.fpr) / (right.fpr - left.fpr))
    }
}

/// Integral of `|d|` over an interval of width `w` on which `d` is linear
/// with end values `d0` and `d1`.
#[inline]
fn abs_linear_area(w: f64, d0: f64, d1: f64) -> f64 {
    if (d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0) {
        let (a0, a1) = (d0.abs(), d1.abs());
        w * (a0 * a0 + a1 * a1) / (2.0 * (a0 + a1))
    } else {
        w * (d0.abs() + d1.abs()) * 0.5
    }
}

fn abroca_knots(a: &[Knot], b: &[Knot]) -> f64 {
    // Both start at fpr 0 and end at fpr 1.
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut f = 0.0;
    let mut total = 0.0;
    while ia + 1 < a.len() && ib + 1 < b.len() {
        let (a0, a1) = (&a[ia], &a[ia + 1]);
        let (b0, b1) = (&b[ib], &b[ib + 1]);
        let next = a1.fpr.min(b1.fpr);
        let d0 = piece_value(a0, a1, f) - piece_value(b0, b1, f);
        let d1 = piece_value(a0, a1, next) - piece_value(b0, b1, next);
        total += abs_linear_area(next - f, d0, d1);
        if a1.fpr == next {
            ia += 1;
        }
        if b1.fpr == next {
            ib += 1;
        }
        f = next;
    }
    total
}

/// Absolute area between two ROC curves, `∫₀¹ |TPR_a(f) − TPR_b(f)| df`.
///
/// Exact: the FPR breakpoints of both curves are merged, and on each resulting
/// interval the difference is linear, so its absolute integral is closed-form
/// (split at the root when the sign changes).
pub fn abroca(a: &RocCurve, b: &RocCurve) -> f64 {
    let mut ka = Vec::with_capacity(a.points.len());
    let mut kb = Vec::with_capacity(b.points.len());
    knots_into(&a.points, &mut ka);
    knots_into(&b.points, &mut kb);
    abroca_knots(&ka, &kb)
}

/// Linear interpolation of TPR at `fpr` (clamped to [0,1]). On a vertical run
/// the highest TPR at that FPR is returned.
pub fn interpolate_tpr(curve: &RocCurve, fpr: f64) -> f64 {
    let f = fpr.clamp(0.0, 1.0);
    let pts = &curve.points;
    // last point with fpr <= f
    let idx = pts.partition_point(|p| p.fpr <= f);
    let left = pts[idx - 1];
    if left.fpr == f || idx == pts.len() {
        return left.tpr;
    }
    let right = pts[idx];
    left.tpr + (right.tpr - left.tpr) * ((f - left.fpr) / (right.fpr - left.fpr))
}

/// ROC curve of each group of a dataset.
pub fn group_curves(ds: &ScoredDataset) -> [RocCurve; 2] {
    let [g0, g1] = ds.split_by_group();
    // validity of the dataset guarantees both classes in both groups
    [
        roc_curve(&g0.scores, &g0.labels).expect("group 0 has both classes"),
        roc_curve(&g1.scores, &g1.labels).expect("group 1 has both classes"),
    ]
}

/// ABROCA between the two groups of a dataset.
pub fn dataset_abroca(ds: &ScoredDataset) -> f64 {
    let [a, b] = group_curves(ds);
    abroca(&a, &b)
}

/// Scores pre-sorted once so that ABROCA can be recomputed in linear time for
/// many different group assignments of the same rows.
#[derive(Debug, Clone)]
pub struct RankedScores {
    order: Vec<usize>,
    sorted_labels: Vec<bool>,
    block_end: Vec<bool>,
}

/// Reusable buffers for [`RankedScores::abroca_for`].
#[derive(Debug, Default)]
pub struct Scratch {
    sorted_groups: Vec<u8>,
    knots: [Vec<Knot>; 2],
}

impl RankedScores {
    pub fn new(scores: &[f64], labels: &[bool]) -> Self {
        let order = descending(scores);
        let sorted_labels = order.iter().map(|&i| labels[i]).collect();
        let block_end = (0..order.len())
            .map(|k| {
                order
                    .get(k + 1)
                    .is_none_or(|&j| scores[j].total_cmp(&scores[order[k]]) != Ordering::Equal)
            })
            .collect();
        Self {
            order,
            sorted_labels,
            block_end,
        }
    }

    pub fn from_dataset(ds: &ScoredDataset) -> Self {
        Self::new(ds.scores(), ds.labels())
    }

    /// ABROCA for the group column `groups` (indexed like the original rows).
    ///
    /// Returns `Err(g)` if group `g` lacks one of the outcome classes.
    pub fn abroca_for(&self, groups: &[u8], scratch: &mut Scratch) -> std::result::Result<f64, u8> {
        scratch.sorted_groups.clear();
        scratch.sorted_groups.extend(self.order.iter().map(|&i| groups[i]));
        let sg = &scratch.sorted_groups;

        let mut pos = [0usize; 2];
        let mut tot = [0usize; 2];
        for (&g, &l) in sg.iter().zip(&self.sorted_labels) {
            tot[g as usize] += 1;
            pos[g as usize] += l as usize;
        }
        for g in 0..2 {
            if pos[g] == 0 || pos[g] == tot[g] {
                return Err(g as u8);
            }
        }
        let neg = [tot[0] - pos[0], tot[1] - pos[1]];
        let inv_pos = [1.0 / pos[0] as f64, 1.0 / pos[1] as f64];
        let inv_neg = [1.0 / neg[0] as f64, 1.0 / neg[1] as f64];

        let [ka, kb] = &mut scratch.knots;
        for k in [&mut *ka, &mut *kb] {
            k.clear();
            k.push(Knot {
                fpr: 0.0,
                lo: 0.0,
                hi: 0.0,
            });
        }
        let mut tp = [0usize; 2];
        let mut fp = [0usize; 2];
        let mut touched = [false; 2];
        for k in 0..sg.len() {
            let g = sg[k] as usize;
            if self.sorted_labels[k] {
                tp[g] += 1;
            } else {
                fp[g] += 1;
            }
            touched[g] = true;
            if self.block_end[k] {
                for (g, knots) in [&mut *ka, &mut *kb].into_iter().enumerate() {
                    if !touched[g] {
                        continue;
                    }
                    touched[g] = false;
                    // exact division keeps the final vertex at (1,1)
                    let fpr = if fp[g] == neg[g] { 1.0 } else { fp[g] as f64 * inv_neg[g] };
                    let tpr = if tp[g] == pos[g] { 1.0 } else { tp[g] as f64 * inv_pos[g] };
                    let last = knots.last_mut().expect("seeded with origin");
                    if last.fpr == fpr {
                        last.hi = tpr;
                    } else {
                        knots.push(Knot { fpr, lo: tpr, hi: tpr });
                    }
                }
            }
        }
        Ok(abroca_knots(ka, kb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn pts(v: &[(f64, f64)]) -> Vec<(f64, f64)> {
        v.to_vec()
    }

    fn as_pairs(c: &RocCurve) -> Vec<(f64, f64)> {
        c.points().iter().map(|p| (p.fpr, p.tpr)).collect()
    }

    /// (FPR, TPR) at every distinct threshold by direct counting.
    fn brute_force_roc(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
        let pos = labels.iter().filter(|&&l| l).count() as f64;
        let neg = labels.len() as f64 - pos;
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let mut out = vec![(0.0, 0.0)];
        for t in thresholds {
            let tp = scores.iter().zip(labels).filter(|(&s, &l)| l && s >= t).count() as f64;
            let fp = scores.iter().zip(labels).filter(|(&s, &l)| !l && s >= t).count() as f64;
            out.push((fp / neg, tp / pos));
        }
        out
    }

    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut gt, mut ties, mut np, mut nn) = (0u64, 0u64, 0u64, 0u64);
        for (i, &li) in labels.iter().enumerate() {
            if li {
                np += 1;
            } else {
                nn += 1;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    if scores[i] > scores[j] {
                        gt += 1;
                    } else if scores[i] == scores[j] {
                        ties += 1;
                    }
                }
            }
        }
        (gt as f64 + 0.5 * ties as f64) / (np as f64 * nn as f64)
    }

    /// Trapezoid rule for |a - b| on a uniform grid of `n` intervals.
    fn grid_abroca(a: &RocCurve, b: &RocCurve, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let g = |i: usize| {
            let f = i as f64 * h;
            (interpolate_tpr(a, f) - interpolate_tpr(b, f)).abs()
        };
        let mut s = 0.5 * (g(0) + g(n));
        for i in 1..n {
            s += g(i);
        }
        s * h
    }

    fn random_scored(seed: u64, n: usize, levels: u32) -> (Vec<f64>, Vec<bool>) {
        let mut rng = stream_rng(seed, &[]);
        loop {
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
            let l: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if l.iter().any(|&x| x) && l.iter().any(|&x| !x) {
                return (s, l);
            }
        }
    }

    #[test]
    fn separable_curve_hugs_the_border() {
        let c = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(as_pairs(&c), pts(&[(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]));
    }

    #[test]
    fn full_tie_is_diagonal() {
        let c = roc_curve(&[0.5, 0.5], &[true, false]).unwrap();
        assert_eq!(as_pairs(&c), pts(&[(0.0, 0.0), (1.0, 1.0)]));
    }

    #[test]
    fn single_class_is_an_error() {
        assert_eq!(roc_curve(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass));
        assert_eq!(auc(&[0.1, 0.2], &[false, false]), Err(Error::SingleClass));
    }

    #[test]
    fn curve_matches_threshold_sweep_oracle() {
        for seed in 0..50 {
            let (s, l) = random_scored(seed, 20, 8);
            assert_eq!(as_pairs(&roc_curve(&s, &l).unwrap()), brute_force_roc(&s, &l), "seed {seed}");
        }
    }

    #[test]
    fn auc_small_cases() {
        assert_eq!(auc(&[0.3, 0.4, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.2, 0.2], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn auc_matches_pair_count_and_curve_area() {
        for seed in 0..50 {
            let (s, l) = random_scored(100 + seed, 50, 12);
            let a = auc(&s, &l).unwrap();
            assert_eq!(a.to_bits(), pair_count_auc(&s, &l).to_bits());
            assert!((roc_curve(&s, &l).unwrap().area() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn abroca_fixed_cases() {
        let perfect = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        let diag = RocCurve::diagonal();
        assert_eq!(abroca(&perfect, &perfect), 0.0);
        assert_eq!(abroca(&perfect, &diag), 0.5);
        assert_eq!(abroca(&diag, &perfect), 0.5);
    }

    #[test]
    fn abroca_handles_crossing_segments() {
        // a: (0,0)->(0.5,1)->(1,1) ; b: (0,0)->(1,1). |a-b| is a triangle of area 0.25.
        let a = RocCurve::new(vec![
            RocPoint { fpr: 0.0, tpr: 0.0 },
            RocPoint { fpr: 0.5, tpr: 1.0 },
            RocPoint { fpr: 1.0, tpr: 1.0 },
        ])
        .unwrap();
        assert!((abroca(&a, &RocCurve::diagonal()) - 0.25).abs() < 1e-15);
        // c crosses the diagonal at 0.5: (0,0)->(0.5,0)... use (0,0)->(0.25,0.5)->(0.75,0.5)->(1,1)
        let c = RocCurve::new(vec![
            RocPoint { fpr: 0.0, tpr: 0.0 },
            RocPoint { fpr: 0.25, tpr: 0.5 },
            RocPoint { fpr: 0.75, tpr: 0.5 },
            RocPoint { fpr: 1.0, tpr: 1.0 },
        ])
        .unwrap();
        // |c - diag| = two triangles each 0.5*0.5*0.25 + two more = 4 * (0.5 * 0.25 * 0.25) = 0.125
        assert!((abroca(&c, &RocCurve::diagonal()) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn abroca_matches_dense_grid() {
        for seed in 0..5 {
            let (s1, l1) = random_scored(200 + seed, 30, 10);
            let (s2, l2) = random_scored(300 + seed, 30, 1000);
            let (a, b) = (roc_curve(&s1, &l1).unwrap(), roc_curve(&s2, &l2).unwrap());
            let exact = abroca(&a, &b);
            let grid = grid_abroca(&a, &b, 1_000_000);
            assert!((exact - grid).abs() < 1e-6, "seed {seed}: {exact} vs {grid}");
        }
    }

    #[test]
    fn interpolation() {
        let diag = RocCurve::diagonal();
        assert_eq!(interpolate_tpr(&diag, 0.3), 0.3);
        let c = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(interpolate_tpr(&c, 0.0), 1.0);
        assert_eq!(interpolate_tpr(&c, 0.5), 1.0);
        let a = RocCurve::new(vec![
            RocPoint { fpr: 0.0, tpr: 0.0 },
            RocPoint { fpr: 0.4, tpr: 0.2 },
            RocPoint { fpr: 1.0, tpr: 1.0 },
        ])
        .unwrap();
        assert!((interpolate_tpr(&a, 0.7) - 0.6).abs() < 1e-15);
        assert_eq!(interpolate_tpr(&a, 0.4), 0.2);
    }

    #[test]
    fn curve_validation() {
        assert!(RocCurve::new(vec![RocPoint { fpr: 0.0, tpr: 0.0 }]).is_err());
        assert!(RocCurve::new(vec![
            RocPoint { fpr: 0.0, tpr: 0.0 },
            RocPoint { fpr: 0.5, tpr: 0.6 },
            RocPoint { fpr: 0.4, tpr: 0.7 },
            RocPoint { fpr: 1.0, tpr: 1.0 },
        ])
        .is_err());
    }

    #[test]
    fn ranked_scores_match_direct_computation() {
        for seed in 0..40 {
            let (s, l) = random_scored(400 + seed, 40, if seed % 2 == 0 { 6 } else { 100_000 });
            let mut rng = stream_rng(seed, &[9]);
            let g: Vec<u8> = (0..s.len()).map(|_| rng.gen_range(0..2)).collect();
            let ranked = RankedScores::new(&s, &l);
            let fast = ranked.abroca_for(&g, &mut Scratch::default());
            match ScoredDataset::new(s.clone(), l.clone(), g.clone()) {
                Ok(ds) => {
                    let slow = dataset_abroca(&ds);
                    assert!((fast.unwrap() - slow).abs() < 1e-14, "seed {seed}");
                }
                Err(_) => assert!(fast.is_err()),
            }
        }
    }

    fn arb_scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        proptest::collection::vec((0u32..20, any::<bool>()), 2..60)
            .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
            .prop_map(|v| (v.iter().map(|x| x.0 as f64 * 0.37 - 2.0).collect(), v.iter().map(|x| x.1).collect()))
    }

    proptest! {
        #[test]
        fn auc_reflection((s, l) in arb_scored()) {
            let neg: Vec<f64> = s.iter().map(|x| -x).collect();
            let a = auc(&s, &l).unwrap();
            prop_assert!((a - (1.0 - auc(&neg, &l).unwrap())).abs() < 1e-12);
        }

        #[test]
        fn auc_rank_invariant((s, l) in arb_scored()) {
            let t: Vec<f64> = s.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
        }

        #[test]
        fn abroca_metric_properties((s1, l1) in arb_scored(), (s2, l2) in arb_scored()) {
            let a = roc_curve(&s1, &l1).unwrap();
            let b = roc_curve(&s2, &l2).unwrap();
            let ab = abroca(&a, &b);
            prop_assert_eq!(ab, abroca(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(abroca(&a, &a), 0.0);
            let gap = (auc(&s1, &l1).unwrap() - auc(&s2, &l2).unwrap()).abs();
            prop_assert!(ab >= gap - 1e-12);
        }

        #[test]
        fn abroca_shared_monotone_transform((s1, l1) in arb_scored(), (s2, l2) in arb_scored()) {
            let t = |v: &[f64]| v.iter().map(|x| (x * 0.5).tanh() * 10.0 + x).collect::<Vec<_>>();
            let before = abroca(&roc_curve(&s1, &l1).unwrap(), &roc_curve(&s2, &l2).unwrap());
            let after = abroca(&roc_curve(&t(&s1), &l1).unwrap(), &roc_curve(&t(&s2), &l2).unwrap());
            prop_assert!((before - after).abs() < 1e-12);
        }
    }
}
