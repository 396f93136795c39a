use serde::{Deserialize, Serialize};

use super::Comparator;
use crate::error::{Error, Result};
use crate::manifest::TemplateStore;
use crate::protocol::{ComparisonPair, TemplateKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryVerdict {
    Symmetric,
    Asymmetric,
    /// Some reverse direction could not be scored (e.g. a one-sided score matrix).
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDeviation {
    pub probe: TemplateKey,
    pub gallery: TemplateKey,
    pub forward: f64,
    pub backward: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub tolerance: f64,
    pub deviations: Vec<PairDeviation>,
    pub max_deviation: f64,
    pub verdict: SymmetryVerdict,
}

/// Evaluates `|M(p, g) − M(g, p)|` on each sample pair.
///
/// Missing precomputed scores make the verdict [`SymmetryVerdict::Unknown`];
/// any other matcher failure is returned as an error.
pub fn check_symmetry<C: Comparator + ?Sized>(
    matcher: &C,
    sample_pairs: &[ComparisonPair],
    store: &TemplateStore<'_>,
    tolerance: f64,
) -> Result<SymmetryReport> {
    if sample_pairs.is_empty() {
        return Err(Error::Config("symmetry check needs at least one pair".into()));
    }
    let mut deviations = Vec::with_capacity(sample_pairs.len());
    let mut unknown = false;
    for pair in sample_pairs {
        let probe = store.get(&pair.probe)?;
        let gallery = store.get(&pair.gallery)?;
        let forward = matcher.compare(probe, gallery);
        let backward = matcher.compare(gallery, probe);
        match (forward, backward) {
            (Ok(f), Ok(b)) => deviations.push(PairDeviation {
                probe: pair.probe.clone(),
                gallery: pair.gallery.clone(),
                forward: f.value(),
                backward: b.value(),
                deviation: (f.value() - b.value()).abs(),
            }),
            (Err(Error::Lookup { .. }), _) | (_, Err(Error::Lookup { .. })) => unknown = true,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    let max_deviation = deviations.iter().map(|d| d.deviation).fold(0.0, f64::max);
    let verdict = if unknown {
        SymmetryVerdict::Unknown
    } else if max_deviation <= tolerance {
        SymmetryVerdict::Symmetric
    } else {
        SymmetryVerdict::Asymmetric
    };
    Ok(SymmetryReport {
        tolerance,
        deviations,
        max_deviation,
        verdict,
    })
}
