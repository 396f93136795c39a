//! Evaluation report written as `report.json`.
//!
//! Real numbers are stored as strings with 12 significant digits so the
//! bytes do not depend on float printing. Counts stay integers.

use fpeval_core::matcher::{SymmetryReport, SymmetryVerdict};
use fpeval_core::metrics::{
    attack_success_rate, det_curve, eer, fmr1000, format_sig12, operating_point, AttackSuccess, DetPoint, Eer,
    OperatingPoint, Rate,
};
use fpeval_core::protocol::CountAttestation;
use fpeval_core::{EvaluationResult, Mode, ScoreSets};
use serde::{Deserialize, Serialize};

use crate::config::{MatcherSpec, SymmetryPolicy};
use crate::error::CliResult;

pub const REPORT_FILE: &str = "report.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const PAIRS_FILE: &str = "pairs.csv";
pub const DET_FILE: &str = "det.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.json";
pub const DUPLICATES_FILE: &str = "duplicates.csv";

fn sig(x: f64) -> String {
    format_sig12(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOut {
    pub value: String,
    pub count: u64,
    pub total: u64,
}

impl From<Rate> for RateOut {
    fn from(r: Rate) -> Self {
        RateOut {
            value: sig(r.value()),
            count: r.count,
            total: r.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherInfo {
    pub spec: MatcherSpec,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOut {
    pub a: u32,
    pub u: u32,
    pub k: u32,
    pub include_mirrored: bool,
    pub exclusion_links: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryOut {
    pub policy: SymmetryPolicy,
    pub sample_pairs: usize,
    pub tolerance: String,
    pub max_deviation: String,
    pub verdict: SymmetryVerdict,
    /// Mirrored comparisons were switched on because of the verdict.
    pub mirrored_forced: bool,
}

impl SymmetryOut {
    pub fn new(policy: SymmetryPolicy, report: &SymmetryReport, mirrored_forced: bool) -> Self {
        SymmetryOut {
            policy,
            sample_pairs: report.deviations.len(),
            tolerance: sig(report.tolerance),
            max_deviation: sig(report.max_deviation),
            verdict: report.verdict,
            mirrored_forced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerOut {
    pub value: RateOut,
    pub threshold: String,
    pub fmr: RateOut,
    pub fnmr: RateOut,
}

impl From<&Eer> for EerOut {
    fn from(e: &Eer) -> Self {
        EerOut {
            value: e.value.into(),
            threshold: sig(e.threshold),
            fmr: e.fmr.into(),
            fnmr: e.fnmr.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointOut {
    pub name: String,
    pub fmr_bound: String,
    pub threshold: String,
    /// Exact threshold, shortest round-trip form, for reuse by other commands.
    pub threshold_exact: f64,
    pub fmr: RateOut,
    pub fnmr: RateOut,
}

impl From<&OperatingPoint> for OperatingPointOut {
    fn from(p: &OperatingPoint) -> Self {
        OperatingPointOut {
            name: p.name.clone(),
            fmr_bound: sig(p.fmr_bound),
            threshold: sig(p.threshold),
            threshold_exact: p.threshold,
            fmr: p.fmr.into(),
            fnmr: p.fnmr.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSuccessOut {
    pub threshold: String,
    pub rate: RateOut,
}

impl From<&AttackSuccess> for AttackSuccessOut {
    fn from(a: &AttackSuccess) -> Self {
        AttackSuccessOut {
            threshold: sig(a.threshold),
            rate: a.rate.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub scores: String,
    pub pairs: String,
    pub det: String,
    pub exclusions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool: ToolInfo,
    pub mode: Mode,
    pub target_db: String,
    pub attack_dbs: Vec<String>,
    pub matcher: MatcherInfo,
    pub protocol: ProtocolOut,
    pub symmetry: SymmetryOut,
    pub counts: CountAttestation,
    pub eer: EerOut,
    pub operating_points: Vec<OperatingPointOut>,
    pub attack_success: Vec<AttackSuccessOut>,
    pub artifacts: Artifacts,
}

/// Metrics derived from one result; everything the report and DET file need.
pub struct Metrics {
    pub det: Vec<DetPoint>,
    pub eer: Eer,
    pub operating_points: Vec<OperatingPoint>,
    pub attack_success: Vec<AttackSuccess>,
}

/// Computes EER, FMR1000 and the extra operating points, plus attack success
/// at each configured threshold and at every operating-point threshold.
pub fn compute_metrics(result: &EvaluationResult, fmr_bounds: &[f64], success_thresholds: &[f64]) -> CliResult<Metrics> {
    let sets = ScoreSets::from_result(result);
    let det = det_curve(&sets)?;
    let eer = eer(&sets)?;
    let mut operating_points = vec![fmr1000(&sets)?];
    for &b in fmr_bounds {
        operating_points.push(operating_point(&sets, b, &format!("FMR<={}", sig(b)))?);
    }
    let impostor = result.impostor_scores();
    let mut thresholds = success_thresholds.to_vec();
    thresholds.extend(operating_points.iter().map(|p| p.threshold));
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let attack_success = thresholds
        .iter()
        .map(|&t| attack_success_rate(&impostor, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Metrics {
        det,
        eer,
        operating_points,
        attack_success,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn fmr1000(&self) -> Option<&OperatingPointOut> {
        self.operating_points.iter().find(|p| p.name == "FMR1000")
    }

    /// One-screen text summary.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} impostors on {} ({} genuine, {} impostor comparisons; matcher {})\n",
            self.mode.as_str(),
            self.target_db,
            self.counts.genuine_actual,
            self.counts.impostor_actual,
            self.matcher.fingerprint
        );
        out.push_str(&format!(
            "symmetry: {:?} (max deviation {}){}\n",
            self.symmetry.verdict,
            self.symmetry.max_deviation,
            if self.symmetry.mirrored_forced {
                ", mirrored comparisons forced"
            } else {
                ""
            }
        ));
        out.push_str(&format!("EER {} at t = {}\n", self.eer.value.value, self.eer.threshold));
        for p in &self.operating_points {
            out.push_str(&format!(
                "{}: t = {}, FMR {} ({}/{}), FNMR {}\n",
                p.name, p.threshold, p.fmr.value, p.fmr.count, p.fmr.total, p.fnmr.value
            ));
        }
        for a in &self.attack_success {
            out.push_str(&format!(
                "attack success at t = {}: {} ({}/{})\n",
                a.threshold, a.rate.value, a.rate.count, a.rate.total
            ));
        }
        out
    }
}
