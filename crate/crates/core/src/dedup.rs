//! Detection of the same physical finger enrolled under two identities.
//!
//! Candidates are flagged from score records and then reviewed by a person;
//! the review verdict lives in the duplicate report CSV so re-runs keep it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::Score;
use crate::manifest::DatabaseManifest;
use crate::protocol::{ComparisonPair, ExclusionSet, FingerKey, Label, ScoreRecord, TemplateKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Candidate,
    Confirmed,
    Rejected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Candidate => "candidate",
            Verdict::Confirmed => "confirmed",
            Verdict::Rejected => "rejected",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "candidate" => Ok(Verdict::Candidate),
            "confirmed" => Ok(Verdict::Confirmed),
            "rejected" => Ok(Verdict::Rejected),
            other => Err(Error::Config(format!("unknown verdict {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateCandidate {
    /// Always ordered `finger_a < finger_b`.
    pub finger_a: FingerKey,
    pub finger_b: FingerKey,
    pub best_score: Score,
    /// Impressions `(of finger_a, of finger_b)` that produced `best_score`.
    pub best_pair: (u32, u32),
    pub verdict: Verdict,
}

/// Every impression of every finger of `a` against every impression of every
/// finger of `b`, ordered by `(i, j, x, y)`. Labelled impostor: the two
/// identities are presumed distinct until review says otherwise.
pub fn cross_database_pairs(a: &DatabaseManifest, b: &DatabaseManifest) -> Vec<ComparisonPair> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ea in &a.entries {
        for eb in &b.entries {
            out.push(ComparisonPair::new(
                TemplateKey::new(&a.name, ea.finger, ea.impression),
                TemplateKey::new(&b.name, eb.finger, eb.impression),
                Label::Impostor,
            ));
        }
    }
    out
}

/// Reports each pair of distinct fingers whose best cross-impression score
/// reaches `dup_threshold`, highest score first.
pub fn find_duplicates(records: &[ScoreRecord], dup_threshold: Score) -> Vec<DuplicateCandidate> {
    let mut best: BTreeMap<(FingerKey, FingerKey), (Score, (u32, u32))> = BTreeMap::new();
    for r in records {
        let (pf, gf) = (r.probe.finger_key(), r.gallery.finger_key());
        if pf == gf {
            continue;
        }
        let (key, impressions) = if pf < gf {
            ((pf, gf), (r.probe.impression, r.gallery.impression))
        } else {
            ((gf, pf), (r.gallery.impression, r.probe.impression))
        };
        best.entry(key)
            .and_modify(|(s, imp)| {
                if r.score > *s || (r.score == *s && impressions < *imp) {
                    *s = r.score;
                    *imp = impressions;
                }
            })
            .or_insert((r.score, impressions));
    }
    let mut out = best
        .into_iter()
        .filter(|(_, (s, _))| *s >= dup_threshold)
        .map(|((a, b), (s, imp))| DuplicateCandidate {
            finger_a: a,
            finger_b: b,
            best_score: s,
            best_pair: imp,
            verdict: Verdict::Candidate,
        })
        .collect::<Vec<_>>();
    out.sort_by(|x, y| {
        y.best_score
            .cmp(&x.best_score)
            .then_with(|| (&x.finger_a, &x.finger_b).cmp(&(&y.finger_a, &y.finger_b)))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionPolicy {
    ConfirmedOnly,
    #[default]
    AllCandidates,
}

/// Exclusion links from the candidates the policy admits. Rejected
/// candidates never enter.
pub fn build_exclusions(candidates: &[DuplicateCandidate], policy: ExclusionPolicy) -> ExclusionSet {
    let mut set = ExclusionSet::new();
    for c in candidates {
        let admit = match policy {
            ExclusionPolicy::ConfirmedOnly => c.verdict == Verdict::Confirmed,
            ExclusionPolicy::AllCandidates => c.verdict != Verdict::Rejected,
        };
        if admit {
            set.insert(c.finger_a.clone(), c.finger_b.clone());
        }
    }
    set
}

/// Copies verdicts from an earlier review onto matching finger pairs.
pub fn apply_review(candidates: &mut [DuplicateCandidate], reviewed: &[DuplicateCandidate]) {
    let verdicts = reviewed
        .iter()
        .map(|c| ((&c.finger_a, &c.finger_b), c.verdict))
        .collect::<BTreeMap<_, _>>();
    for c in candidates {
        if let Some(v) = verdicts.get(&(&c.finger_a, &c.finger_b)) {
            c.verdict = *v;
        }
    }
}

/// Unreviewed candidates that still need a human decision.
pub fn pending_review(candidates: &[DuplicateCandidate]) -> usize {
    candidates.iter().filter(|c| c.verdict == Verdict::Candidate).count()
}

pub const DUPLICATES_CSV_HEADER: &str = "db_a,finger_a,db_b,finger_b,best_score,impr_a,impr_b,verdict";

pub fn duplicates_csv(candidates: &[DuplicateCandidate]) -> String {
    let mut out = format!("{DUPLICATES_CSV_HEADER}\n");
    for c in candidates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.finger_a.db,
            c.finger_a.finger,
            c.finger_b.db,
            c.finger_b.finger,
            c.best_score,
            c.best_pair.0,
            c.best_pair.1,
            c.verdict
        ));
    }
    out
}

pub fn read_duplicates_csv<R: Read>(reader: R) -> Result<Vec<DuplicateCandidate>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Import(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != DUPLICATES_CSV_HEADER {
        return Err(Error::Import(format!("unexpected duplicate report header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Import(e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let num = |i: usize| row.get(i).and_then(|s| s.trim().parse::<u32>().ok());
        let a = FingerKey::new(row.get(0).unwrap_or(""), num(1).ok_or_else(|| bad("finger_a"))?);
        let b = FingerKey::new(row.get(2).unwrap_or(""), num(3).ok_or_else(|| bad("finger_b"))?);
        let best_score = row
            .get(4)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .and_then(|v| Score::new(v).ok())
            .ok_or_else(|| bad("best_score"))?;
        let best_pair = (
            num(5).ok_or_else(|| bad("impr_a"))?,
            num(6).ok_or_else(|| bad("impr_b"))?,
        );
        let verdict = row.get(7).unwrap_or("").parse().map_err(|_| bad("verdict"))?;
        let (finger_a, finger_b, best_pair) = if a <= b {
            (a, b, best_pair)
        } else {
            (b, a, (best_pair.1, best_pair.0))
        };
        out.push(DuplicateCandidate {
            finger_a,
            finger_b,
            best_score,
            best_pair,
            verdict,
        });
    }
    Ok(out)
}
