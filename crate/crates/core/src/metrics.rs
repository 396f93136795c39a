//! Error rates over labelled score sets.
//!
//! A comparison is accepted when `score >= t`. FMR counts impostor scores at
//! or above `t`; FNMR counts genuine scores strictly below it. Rates are kept
//! as exact integer ratios; conversion to `f64` happens only for output.
//!
//! Candidate thresholds are the distinct observed scores of both classes plus
//! one sentinel at `max + 1`, where nothing is accepted.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::Score;
pub use crate::protocol::EvaluationResult;

/// `count / total`, exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rate {
    pub count: u64,
    pub total: u64,
}

impl Rate {
    pub fn new(count: u64, total: u64) -> Self {
        debug_assert!(total > 0 && count <= total);
        Rate { count, total }
    }

    pub fn value(self) -> f64 {
        self.count as f64 / self.total as f64
    }

    /// Exact comparison of two ratios.
    pub fn cmp_exact(self, other: Rate) -> Ordering {
        (self.count as u128 * other.total as u128).cmp(&(other.count as u128 * self.total as u128))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_sig12(self.value()))
    }
}

/// Formats with 12 significant digits in positional notation.
pub fn format_sig12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000000".into();
    }
    let render = |x: f64| {
        let exp = x.abs().log10().floor() as i32;
        let decimals = (11 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    };
    let first = render(x);
    // rounding may carry into a new leading digit (9.99… -> 10.0…)
    let reparsed: f64 = first.parse().unwrap_or(x);
    if reparsed.abs().log10().floor() != x.abs().log10().floor() {
        render(reparsed)
    } else {
        first
    }
}

/// Genuine and impostor scores, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSets {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

fn sorted(scores: impl IntoIterator<Item = Score>) -> Vec<f64> {
    let mut v = scores.into_iter().map(Score::value).collect::<Vec<_>>();
    v.sort_by(f64::total_cmp);
    v
}

fn count_below(sorted: &[f64], t: f64) -> u64 {
    sorted.partition_point(|&s| s < t) as u64
}

impl ScoreSets {
    pub fn new(genuine: impl IntoIterator<Item = Score>, impostor: impl IntoIterator<Item = Score>) -> Self {
        ScoreSets {
            genuine: sorted(genuine),
            impostor: sorted(impostor),
        }
    }

    pub fn from_result(result: &EvaluationResult) -> Self {
        ScoreSets::new(
            result.genuine.iter().map(|r| r.score),
            result.impostor.iter().map(|r| r.score),
        )
    }

    pub fn genuine(&self) -> &[f64] {
        &self.genuine
    }

    pub fn impostor(&self) -> &[f64] {
        &self.impostor
    }

    fn require_both(&self) -> Result<()> {
        if self.impostor.is_empty() {
            return Err(Error::UndefinedMetric("no impostor scores"));
        }
        if self.genuine.is_empty() {
            return Err(Error::UndefinedMetric("no genuine scores"));
        }
        Ok(())
    }

    /// Distinct observed scores ascending, then the sentinel `max + 1`.
    pub fn candidate_thresholds(&self) -> Vec<f64> {
        let mut all = Vec::with_capacity(self.genuine.len() + self.impostor.len() + 1);
        all.extend_from_slice(&self.genuine);
        all.extend_from_slice(&self.impostor);
        all.sort_by(f64::total_cmp);
        all.dedup();
        if let Some(&max) = all.last() {
            all.push(max + 1.0);
        }
        all
    }
}

impl From<&EvaluationResult> for ScoreSets {
    fn from(result: &EvaluationResult) -> Self {
        ScoreSets::from_result(result)
    }
}

/// Fraction of impostor scores `>= t`.
pub fn fmr(scores: &ScoreSets, t: f64) -> Result<Rate> {
    let total = scores.impostor.len() as u64;
    if total == 0 {
        return Err(Error::UndefinedMetric("no impostor scores"));
    }
    Ok(Rate::new(total - count_below(&scores.impostor, t), total))
}

/// Fraction of genuine scores `< t`.
pub fn fnmr(scores: &ScoreSets, t: f64) -> Result<Rate> {
    let total = scores.genuine.len() as u64;
    if total == 0 {
        return Err(Error::UndefinedMetric("no genuine scores"));
    }
    Ok(Rate::new(count_below(&scores.genuine, t), total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fmr: Rate,
    pub fnmr: Rate,
}

/// One point per candidate threshold, ascending.
pub fn det_curve(scores: &ScoreSets) -> Result<Vec<DetPoint>> {
    scores.require_both()?;
    let ng = scores.genuine.len() as u64;
    let ni = scores.impostor.len() as u64;
    let (mut gi, mut ii) = (0usize, 0usize);
    let mut out = Vec::new();
    for t in scores.candidate_thresholds() {
        while gi < scores.genuine.len() && scores.genuine[gi] < t {
            gi += 1;
        }
        while ii < scores.impostor.len() && scores.impostor[ii] < t {
            ii += 1;
        }
        out.push(DetPoint {
            threshold: t,
            fmr: Rate::new(ni - ii as u64, ni),
            fnmr: Rate::new(gi as u64, ng),
        });
    }
    Ok(out)
}

/// DET curve as `threshold,fmr,fnmr` CSV.
pub fn det_csv(points: &[DetPoint]) -> String {
    let mut out = String::from("threshold,fmr,fnmr\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fmr, p.fnmr));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eer {
    /// `(FMR + FNMR) / 2` at `threshold`.
    pub value: Rate,
    pub threshold: f64,
    pub fmr: Rate,
    pub fnmr: Rate,
}

/// Equal error rate at the candidate threshold minimising `|FMR − FNMR|`,
/// lowest threshold on ties.
pub fn eer(scores: &ScoreSets) -> Result<Eer> {
    let points = det_curve(scores)?;
    let ng = scores.genuine.len() as u128;
    let ni = scores.impostor.len() as u128;
    // on the common denominator ni·ng the gap is |fmr·ng − fnmr·ni|
    let gap = |p: &DetPoint| (p.fmr.count as u128 * ng).abs_diff(p.fnmr.count as u128 * ni);
    let best = points
        .iter()
        .min_by(|a, b| gap(a).cmp(&gap(b)).then(a.threshold.total_cmp(&b.threshold)))
        .expect("candidate set is never empty");
    let num = best.fmr.count as u128 * ng + best.fnmr.count as u128 * ni;
    let den = 2 * ni * ng;
    let g = gcd(num, den);
    Ok(Eer {
        value: Rate::new((num / g) as u64, (den / g) as u64),
        threshold: best.threshold,
        fmr: best.fmr,
        fnmr: best.fnmr,
    })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub name: String,
    pub fmr_bound: f64,
    pub threshold: f64,
    pub fmr: Rate,
    pub fnmr: Rate,
}

/// Smallest candidate threshold with `FMR <= fmr_bound`. The sentinel
/// always qualifies, so a bound no observed score meets yields it.
pub fn operating_point(scores: &ScoreSets, fmr_bound: f64, name: &str) -> Result<OperatingPoint> {
    if !(fmr_bound > 0.0 && fmr_bound <= 1.0) {
        return Err(Error::Config(format!("fmr bound {fmr_bound} outside (0, 1]")));
    }
    let points = det_curve(scores)?;
    let p = points
        .iter()
        .find(|p| p.fmr.value() <= fmr_bound)
        .expect("sentinel has fmr 0");
    Ok(OperatingPoint {
        name: name.to_string(),
        fmr_bound,
        threshold: p.threshold,
        fmr: p.fmr,
        fnmr: p.fnmr,
    })
}

/// FMR1000: the operating point with FMR at most 0.1%.
pub fn fmr1000(scores: &ScoreSets) -> Result<OperatingPoint> {
    operating_point(scores, 0.001, "FMR1000")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSuccess {
    pub threshold: f64,
    pub accepted: u64,
    pub total: u64,
    pub rate: Rate,
}

/// Share of attack attempts scoring `>= t`; the same arithmetic as [`fmr`].
pub fn attack_success_rate(impostor_scores: &[Score], t: f64) -> Result<AttackSuccess> {
    if impostor_scores.is_empty() {
        return Err(Error::UndefinedMetric("no attack attempts"));
    }
    let accepted = impostor_scores.iter().filter(|s| s.value() >= t).count() as u64;
    let total = impostor_scores.len() as u64;
    Ok(AttackSuccess {
        threshold: t,
        accepted,
        total,
        rate: Rate::new(accepted, total),
    })
}

/// Nearest-rank percentile (`q` in `[0, 100]`) of a non-empty score list.
pub fn percentile(scores: &[Score], q: f64) -> Option<f64> {
    if scores.is_empty() || !(0.0..=100.0).contains(&q) {
        return None;
    }
    let v = sorted(scores.iter().copied());
    let rank = ((q / 100.0) * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> Vec<Score> {
        v.iter().map(|&x| Score::new(x).unwrap()).collect()
    }

    fn sets(g: &[f64], i: &[f64]) -> ScoreSets {
        ScoreSets::new(s(g), s(i))
    }

    #[test]
    fn fmr_is_inclusive() {
        let x = sets(&[1.0], &[10.0, 20.0, 30.0]);
        assert_eq!(fmr(&x, 20.0).unwrap(), Rate::new(2, 3));
        assert_eq!(fmr(&x, 31.0).unwrap().count, 0);
    }

    #[test]
    fn fmr_of_the_reported_skilled_attack() {
        let mut scores = vec![60.0; 711];
        scores.extend(vec![10.0; 89]);
        let x = sets(&[1.0], &scores);
        let r = fmr(&x, 48.0).unwrap();
        assert_eq!((r.count, r.total), (711, 800));
        assert_eq!(r.value(), 0.88875);
    }

    #[test]
    fn fnmr_is_strict() {
        let x = sets(&[10.0, 20.0, 30.0], &[1.0]);
        assert_eq!(fnmr(&x, 20.0).unwrap(), Rate::new(1, 3));
        assert_eq!(fnmr(&x, 10.0).unwrap().count, 0);
        assert_eq!(fnmr(&x, 0.0).unwrap().count, 0);
        let x = sets(&[5.0, 5.0, 5.0], &[1.0]);
        assert_eq!(fnmr(&x, 5.0).unwrap().count, 0);
    }

    #[test]
    fn empty_sets_are_undefined() {
        let x = sets(&[], &[]);
        assert!(matches!(fmr(&x, 0.0), Err(Error::UndefinedMetric(_))));
        assert!(matches!(fnmr(&x, 0.0), Err(Error::UndefinedMetric(_))));
        assert!(det_curve(&x).is_err());
        assert!(attack_success_rate(&[], 1.0).is_err());
    }

    #[test]
    fn perfect_separation() {
        let x = sets(&[50.0], &[10.0]);
        let det = det_curve(&x).unwrap();
        assert_eq!(det.len(), 3);
        assert!(det.iter().any(|p| p.fmr.count == 0 && p.fnmr.count == 0));
        let e = eer(&x).unwrap();
        assert_eq!(e.value.count, 0);
        assert_eq!(e.threshold, 50.0);
    }

    #[test]
    fn indistinguishable_classes() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let x = sets(&v, &v);
        let e = eer(&x).unwrap();
        assert_eq!(e.value.value(), 0.5);
        for p in det_curve(&x).unwrap() {
            // 1 − FNMR is the genuine survival function, equal to FMR here
            assert_eq!(p.fmr.count + p.fnmr.count, p.fmr.total);
        }
    }

    #[test]
    fn eer_hand_enumerated() {
        // t:    1    2    3    4    5
        // FMR:  1    1   1/2  1/2   0
        // FNMR: 0   1/2  1/2   1    1
        let x = sets(&[1.0, 3.0], &[2.0, 4.0]);
        let e = eer(&x).unwrap();
        assert_eq!(e.threshold, 3.0);
        assert_eq!(e.value.value(), 0.5);
        assert_eq!(e.fmr, Rate::new(1, 2));
        assert_eq!(e.fnmr, Rate::new(1, 2));
    }

    #[test]
    fn operating_point_hand_enumerated() {
        let imp = (1..=10).map(f64::from).collect::<Vec<_>>();
        let x = sets(&[5.5], &imp);
        let op = operating_point(&x, 0.2, "FMR5").unwrap();
        assert_eq!(op.threshold, 9.0);
        assert_eq!(op.fmr, Rate::new(2, 10));
        let all = operating_point(&x, 1.0, "all").unwrap();
        assert_eq!(all.threshold, 1.0);
        assert!(operating_point(&x, 0.0, "x").is_err());
        assert!(operating_point(&x, 1.5, "x").is_err());
    }

    #[test]
    fn operating_point_unreachable_bound_reports_sentinel() {
        let x = sets(&[3.0], &[1.0, 2.0]);
        assert_eq!(operating_point(&x, 0.1, "x").unwrap().threshold, 3.0);
        let x = sets(&[1.0], &[2.0, 3.0]);
        let op = operating_point(&x, 0.1, "x").unwrap();
        assert_eq!(op.threshold, 4.0);
        assert_eq!(op.fnmr, Rate::new(1, 1));
        assert_eq!(op.fmr.count, 0);
    }

    #[test]
    fn fmr1000_on_4950_scores() {
        let imp = (0..4950).map(|i| (i % 1000) as f64 + i as f64 / 10_000.0).collect::<Vec<_>>();
        let x = sets(&[500.0], &imp);
        let op = fmr1000(&x).unwrap();
        assert!(op.fmr.count <= 4);
        // one step lower lets a fifth impostor through
        let lower = x
            .candidate_thresholds()
            .into_iter()
            .filter(|&t| t < op.threshold)
            .last()
            .unwrap();
        assert!(fmr(&x, lower).unwrap().count > 4);
    }

    #[test]
    fn attack_success_counts() {
        let v = s(&[47.0, 48.0, 120.0]);
        let a = attack_success_rate(&v, 48.0).unwrap();
        assert_eq!((a.accepted, a.total), (2, 3));
        assert_eq!(attack_success_rate(&v, 500.0).unwrap().accepted, 0);
        assert_eq!(attack_success_rate(&v, 0.0).unwrap().accepted, 3);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.88875), "0.888750000000");
        assert_eq!(format_sig12(48.0), "48.0000000000");
        assert_eq!(format_sig12(0.0), "0.00000000000");
        assert_eq!(format_sig12(0.001), "0.00100000000000");
        assert_eq!(format_sig12(888.75), "888.750000000");
        assert_eq!(format_sig12(9.9999999999999), "10.0000000000");
    }

    #[test]
    fn percentile_nearest_rank() {
        let v = s(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(percentile(&v, 100.0), Some(5.0));
        assert_eq!(percentile(&v, 50.0), Some(3.0));
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    proptest! {
        #[test]
        fn rates_are_monotone(
            g in prop::collection::vec(0u32..60, 1..40),
            i in prop::collection::vec(0u32..60, 1..40),
            t1 in 0u32..62, t2 in 0u32..62,
        ) {
            let x = ScoreSets::new(
                g.iter().map(|&v| Score::new(v as f64).unwrap()),
                i.iter().map(|&v| Score::new(v as f64).unwrap()),
            );
            let (lo, hi) = if t1 <= t2 { (t1 as f64, t2 as f64) } else { (t2 as f64, t1 as f64) };
            prop_assert!(fmr(&x, lo).unwrap().count >= fmr(&x, hi).unwrap().count);
            prop_assert!(fnmr(&x, lo).unwrap().count <= fnmr(&x, hi).unwrap().count);
            let min = x.candidate_thresholds()[0];
            prop_assert_eq!(fmr(&x, min).unwrap().count, i.len() as u64);
            prop_assert_eq!(fnmr(&x, min).unwrap().count, 0);
        }

        #[test]
        fn det_agrees_with_pointwise_rates(
            g in prop::collection::vec(0.0f64..10.0, 1..30),
            i in prop::collection::vec(0.0f64..10.0, 1..30),
        ) {
            let x = ScoreSets::new(
                g.iter().map(|&v| Score::new(v).unwrap()),
                i.iter().map(|&v| Score::new(v).unwrap()),
            );
            for p in det_curve(&x).unwrap() {
                prop_assert_eq!(p.fmr, fmr(&x, p.threshold).unwrap());
                prop_assert_eq!(p.fnmr, fnmr(&x, p.threshold).unwrap());
            }
        }

        #[test]
        fn attack_success_equals_fmr(i in prop::collection::vec(0u32..20, 1..30), t in 0u32..21) {
            let scores = i.iter().map(|&v| Score::new(v as f64).unwrap()).collect::<Vec<_>>();
            let x = ScoreSets::new([Score::ZERO], scores.clone());
            prop_assert_eq!(attack_success_rate(&scores, t as f64).unwrap().rate, fmr(&x, t as f64).unwrap());
        }
    }
}
