//! Similarity scoring between two templates.
//!
//! Three backends sit behind [`MatcherHandle`]: the built-in minutiae matcher,
//! an external command, and a precomputed score matrix. Anything that
//! implements [`Comparator`] can drive the batch scorer and the protocols.

mod batch;
mod builtin;
mod external;
mod precomputed;
mod symmetry;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifest::StoredTemplate;

pub use batch::{compute_score_matrix, ScoreCache};
pub use builtin::{compare_templates, BuiltinParams};
pub use external::ExternalCommand;
pub use precomputed::{import_score_matrix, ScoreMatrix, SCORE_MATRIX_HEADER};
pub use symmetry::{check_symmetry, PairDeviation, SymmetryReport, SymmetryVerdict};

/// Non-negative, finite similarity. Larger means more similar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub const ZERO: Score = Score(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Validation(format!(
                "score must be finite and non-negative, got {value}"
            )));
        }
        // collapse -0.0 so equal scores are bit-identical
        Ok(Score(value + 0.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Score {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Score::new(value)
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // shortest representation that parses back to the same f64
        write!(f, "{}", self.0)
    }
}

/// A similarity function over stored templates.
pub trait Comparator: Sync {
    fn compare(&self, probe: &StoredTemplate, gallery: &StoredTemplate) -> Result<Score>;

    /// Identifies the matcher and its parameters; part of every cache key.
    fn fingerprint(&self) -> String;

    /// Upper bound on concurrent `compare` calls, if the backend has one.
    fn max_concurrency(&self) -> Option<usize> {
        None
    }
}

impl<C: Comparator + ?Sized> Comparator for &C {
    fn compare(&self, probe: &StoredTemplate, gallery: &StoredTemplate) -> Result<Score> {
        (**self).compare(probe, gallery)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }

    fn max_concurrency(&self) -> Option<usize> {
        (**self).max_concurrency()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    Builtin,
    ExternalCommand,
    Precomputed,
}

#[derive(Debug, Clone)]
pub enum MatcherHandle {
    Builtin(BuiltinParams),
    External(ExternalCommand),
    Precomputed(ScoreMatrix),
}

impl MatcherHandle {
    pub fn builtin() -> Self {
        MatcherHandle::Builtin(BuiltinParams::default())
    }

    pub fn kind(&self) -> MatcherKind {
        match self {
            MatcherHandle::Builtin(_) => MatcherKind::Builtin,
            MatcherHandle::External(_) => MatcherKind::ExternalCommand,
            MatcherHandle::Precomputed(_) => MatcherKind::Precomputed,
        }
    }
}

impl Comparator for MatcherHandle {
    fn compare(&self, probe: &StoredTemplate, gallery: &StoredTemplate) -> Result<Score> {
        match self {
            MatcherHandle::Builtin(params) => {
                Ok(compare_templates(params, &probe.template, &gallery.template))
            }
            MatcherHandle::External(cmd) => cmd.compare(&probe.path, &gallery.path),
            MatcherHandle::Precomputed(matrix) => matrix.lookup(&probe.key, &gallery.key),
        }
    }

    fn fingerprint(&self) -> String {
        match self {
            MatcherHandle::Builtin(params) => {
                let canon = serde_json::to_string(params).expect("params serialize");
                format!("builtin-{}", short_hash(canon.as_bytes()))
            }
            MatcherHandle::External(cmd) => {
                format!("external-{}", short_hash(cmd.command.as_bytes()))
            }
            MatcherHandle::Precomputed(matrix) => {
                format!("precomputed-{}", short_hash(matrix.to_csv_string().as_bytes()))
            }
        }
    }

    fn max_concurrency(&self) -> Option<usize> {
        match self {
            MatcherHandle::External(cmd) => Some(cmd.max_concurrency.max(1)),
            _ => None,
        }
    }
}

/// Wraps a matcher as `max(M(p, g), M(g, p))`, symmetric by construction.
#[derive(Debug, Clone)]
pub struct Symmetrized<C>(pub C);

impl<C: Comparator> Comparator for Symmetrized<C> {
    fn compare(&self, probe: &StoredTemplate, gallery: &StoredTemplate) -> Result<Score> {
        let forward = self.0.compare(probe, gallery)?;
        let backward = self.0.compare(gallery, probe)?;
        Ok(forward.max(backward))
    }

    fn fingerprint(&self) -> String {
        format!("symmetrized-{}", self.0.fingerprint())
    }

    fn max_concurrency(&self) -> Option<usize> {
        self.0.max_concurrency()
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}
