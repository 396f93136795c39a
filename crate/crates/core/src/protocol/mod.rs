//! Comparison-pair generation for the random-impostor and skilled-impostor
//! verification protocols.

mod run;
mod skilled;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatabaseManifest;
use crate::matcher::Score;

pub use run::{run_verification_test, CountAttestation, EvaluationResult, Mode};
pub use skilled::{skilled_candidates, skilled_impostor_select, ProbeCandidates};

/// Identifies one impression: `(database, finger, impression)`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TemplateKey {
    pub db: String,
    pub finger: u32,
    pub impression: u32,
}

impl TemplateKey {
    pub fn new(db: impl Into<String>, finger: u32, impression: u32) -> Self {
        TemplateKey {
            db: db.into(),
            finger,
            impression,
        }
    }

    pub fn finger_key(&self) -> FingerKey {
        FingerKey::new(&self.db, self.finger)
    }
}

impl fmt::Display for TemplateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}_{}", self.db, self.finger, self.impression)
    }
}

/// Identifies a finger within a database.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FingerKey {
    pub db: String,
    pub finger: u32,
}

impl FingerKey {
    pub fn new(db: impl Into<String>, finger: u32) -> Self {
        FingerKey {
            db: db.into(),
            finger,
        }
    }
}

impl fmt::Display for FingerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.db, self.finger)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Genuine,
    Impostor,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComparisonPair {
    pub probe: TemplateKey,
    pub gallery: TemplateKey,
    pub label: Label,
}

impl ComparisonPair {
    pub fn new(probe: TemplateKey, gallery: TemplateKey, label: Label) -> Self {
        ComparisonPair {
            probe,
            gallery,
            label,
        }
    }

    pub fn reversed(&self) -> Self {
        ComparisonPair {
            probe: self.gallery.clone(),
            gallery: self.probe.clone(),
            label: self.label,
        }
    }
}

/// One scored comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub probe: TemplateKey,
    pub gallery: TemplateKey,
    pub label: Label,
    pub score: Score,
}

/// Finger pairs known to be the same physical finger. Links are unordered:
/// `contains(a, b) == contains(b, a)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet {
    links: BTreeSet<(FingerKey, FingerKey)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ExclusionLink {
    a: FingerKey,
    b: FingerKey,
}

impl ExclusionSet {
    pub fn new() -> Self {
        ExclusionSet::default()
    }

    /// Adds the link `a ~ b`; self-links are ignored.
    pub fn insert(&mut self, a: FingerKey, b: FingerKey) -> bool {
        if a == b {
            return false;
        }
        let link = if a < b { (a, b) } else { (b, a) };
        self.links.insert(link)
    }

    pub fn contains(&self, a: &FingerKey, b: &FingerKey) -> bool {
        let link = if a < b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.links.contains(&link)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FingerKey, &FingerKey)> {
        self.links.iter().map(|(a, b)| (a, b))
    }

    pub fn to_json(&self) -> String {
        let links = self
            .links
            .iter()
            .map(|(a, b)| ExclusionLink {
                a: a.clone(),
                b: b.clone(),
            })
            .collect::<Vec<_>>();
        serde_json::to_string_pretty(&links).expect("links serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let links: Vec<ExclusionLink> =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("exclusions: {e}")))?;
        let mut set = ExclusionSet::new();
        for link in links {
            set.insert(link.a, link.b);
        }
        Ok(set)
    }
}

impl Serialize for ExclusionSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.links.iter().map(|(a, b)| ExclusionLink {
            a: a.clone(),
            b: b.clone(),
        }))
    }
}

impl<'de> Deserialize<'de> for ExclusionSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let links = Vec::<ExclusionLink>::deserialize(deserializer)?;
        let mut set = ExclusionSet::new();
        for link in links {
            set.insert(link.a, link.b);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Impressions per target finger used as impostor probes.
    pub a: u32,
    /// Impressions per attack finger considered as candidates.
    pub u: u32,
    /// Candidates kept per probe in the skilled protocol.
    pub k: u32,
    #[serde(default)]
    pub exclusions: ExclusionSet,
    /// Score both directions of every comparison.
    #[serde(default)]
    pub include_mirrored: bool,
}

impl ProtocolConfig {
    /// `a = u = m`, `k = 1`: every impression is a target and only the most
    /// similar candidate attacks it.
    pub fn suggested(m: u32) -> Self {
        ProtocolConfig {
            a: m,
            u: m,
            k: 1,
            exclusions: ExclusionSet::new(),
            include_mirrored: false,
        }
    }

    /// The traditional FVC setting: one impression per finger for impostors.
    pub fn fvc(m: u32) -> Self {
        ProtocolConfig {
            a: 1,
            ..ProtocolConfig::suggested(m)
        }
    }

    pub fn validate(&self, target_m: u32, attack_ms: &[u32]) -> Result<()> {
        if self.a == 0 || self.a > target_m {
            return Err(Error::Config(format!(
                "a = {} outside 1..={target_m}",
                self.a
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.u == 0 {
            return Err(Error::Config("u must be at least 1".into()));
        }
        if let Some(m) = attack_ms.iter().find(|&&m| self.u > m) {
            return Err(Error::Config(format!("u = {} exceeds attack database m = {m}", self.u)));
        }
        Ok(())
    }
}

/// Every impression against every later impression of the same finger:
/// `n · m · (m − 1) / 2` pairs, ordered by finger, then `j`, then `y`.
pub fn genuine_pairs(manifest: &DatabaseManifest) -> Vec<ComparisonPair> {
    let (n, m) = (manifest.n, manifest.m);
    let mut out = Vec::with_capacity((n * m * m.saturating_sub(1) / 2) as usize);
    for i in 1..=n {
        for j in 1..=m {
            for y in (j + 1)..=m {
                out.push(ComparisonPair::new(
                    TemplateKey::new(&manifest.name, i, j),
                    TemplateKey::new(&manifest.name, i, y),
                    Label::Genuine,
                ));
            }
        }
    }
    out
}

/// The first `a` impressions of each finger against the first `a` of every
/// later finger: `n · (n − 1) · a² / 2` pairs, ordered by `(i, x, j, y)`.
pub fn random_impostor_pairs(manifest: &DatabaseManifest, a: u32) -> Result<Vec<ComparisonPair>> {
    if a == 0 || a > manifest.m {
        return Err(Error::Config(format!("a = {a} outside 1..={}", manifest.m)));
    }
    let n = manifest.n;
    let mut out = Vec::with_capacity((n as u64 * n.saturating_sub(1) as u64 * (a * a) as u64 / 2) as usize);
    for i in 1..=n {
        for x in (i + 1)..=n {
            for j in 1..=a {
                for y in 1..=a {
                    out.push(ComparisonPair::new(
                        TemplateKey::new(&manifest.name, i, j),
                        TemplateKey::new(&manifest.name, x, y),
                        Label::Impostor,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Interleaves each pair with its mirror: `p, p', q, q', ...`.
pub fn with_mirrored(pairs: Vec<ComparisonPair>) -> Vec<ComparisonPair> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        let r = p.reversed();
        out.push(p);
        out.push(r);
    }
    out
}

pub const PAIRS_CSV_HEADER: &str =
    "probe_db,probe_finger,probe_impression,gallery_db,gallery_finger,gallery_impression,label";
pub const SCORES_CSV_HEADER: &str =
    "probe_db,probe_finger,probe_impression,gallery_db,gallery_finger,gallery_impression,label,score";

pub fn write_pairs_csv<'a, W: Write>(
    mut out: W,
    pairs: impl IntoIterator<Item = (&'a TemplateKey, &'a TemplateKey, Label)>,
) -> std::io::Result<()> {
    writeln!(out, "{PAIRS_CSV_HEADER}")?;
    for (p, g, label) in pairs {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.db, p.finger, p.impression, g.db, g.finger, g.impression, label
        )?;
    }
    Ok(())
}

pub fn write_scores_csv<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a ScoreRecord>,
) -> std::io::Result<()> {
    writeln!(out, "{SCORES_CSV_HEADER}")?;
    for r in records {
        let (p, g) = (&r.probe, &r.gallery);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.db, p.finger, p.impression, g.db, g.finger, g.impression, r.label, r.score
        )?;
    }
    Ok(())
}

/// Reads score records written by [`write_scores_csv`].
pub fn read_scores_csv<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Import(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != SCORES_CSV_HEADER {
        return Err(Error::Import(format!("unexpected score record header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Import(e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let idx = |i: usize| row.get(i).and_then(|s| s.parse::<u32>().ok());
        let probe = TemplateKey::new(
            row.get(0).ok_or_else(|| bad("probe_db"))?,
            idx(1).ok_or_else(|| bad("probe_finger"))?,
            idx(2).ok_or_else(|| bad("probe_impression"))?,
        );
        let gallery = TemplateKey::new(
            row.get(3).ok_or_else(|| bad("gallery_db"))?,
            idx(4).ok_or_else(|| bad("gallery_finger"))?,
            idx(5).ok_or_else(|| bad("gallery_impression"))?,
        );
        let label = match row.get(6) {
            Some("genuine") => Label::Genuine,
            Some("impostor") => Label::Impostor,
            _ => return Err(bad("label")),
        };
        let score = row
            .get(7)
            .and_then(|s| s.parse::<f64>().ok())
            .and_then(|v| Score::new(v).ok())
            .ok_or_else(|| bad("score"))?;
        out.push(ScoreRecord {
            probe,
            gallery,
            label,
            score,
        });
    }
    Ok(out)
}
