use serde::{Deserialize, Serialize};

use super::{
    genuine_pairs, random_impostor_pairs, skilled_impostor_select, with_mirrored, ProtocolConfig, ScoreRecord,
};
use crate::error::{Error, Result};
use crate::manifest::{Database, TemplateStore};
use crate::matcher::{compute_score_matrix, Comparator, Score, ScoreCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Random,
    Skilled,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Random => "random",
            Mode::Skilled => "skilled",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Mode::Random),
            "skilled" => Ok(Mode::Skilled),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Comparison counts, checked against the closed-form formulas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountAttestation {
    pub n: u32,
    pub m: u32,
    pub a: u32,
    pub u: u32,
    pub k: u32,
    pub include_mirrored: bool,
    pub genuine_expected: u64,
    pub genuine_actual: u64,
    pub impostor_expected: u64,
    pub impostor_actual: u64,
}

impl CountAttestation {
    pub fn expected_genuine(n: u32, m: u32, mirrored: bool) -> u64 {
        let base = n as u64 * m as u64 * (m as u64).saturating_sub(1) / 2;
        if mirrored {
            2 * base
        } else {
            base
        }
    }

    pub fn expected_impostor(mode: Mode, n: u32, a: u32, k: u32, mirrored: bool) -> u64 {
        match mode {
            Mode::Random => {
                let base = n as u64 * (n as u64).saturating_sub(1) * (a as u64 * a as u64) / 2;
                if mirrored {
                    2 * base
                } else {
                    base
                }
            }
            Mode::Skilled => n as u64 * a as u64 * k as u64,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.genuine_actual != self.genuine_expected {
            return Err(Error::Consistency {
                what: "genuine comparisons",
                expected: self.genuine_expected,
                actual: self.genuine_actual,
            });
        }
        if self.impostor_actual != self.impostor_expected {
            return Err(Error::Consistency {
                what: "impostor comparisons",
                expected: self.impostor_expected,
                actual: self.impostor_actual,
            });
        }
        Ok(())
    }
}

/// Labelled scores from one verification test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub mode: Mode,
    pub target_db: String,
    pub config: ProtocolConfig,
    pub attestation: CountAttestation,
    pub genuine: Vec<ScoreRecord>,
    pub impostor: Vec<ScoreRecord>,
}

impl EvaluationResult {
    pub fn genuine_scores(&self) -> Vec<Score> {
        self.genuine.iter().map(|r| r.score).collect()
    }

    pub fn impostor_scores(&self) -> Vec<Score> {
        self.impostor.iter().map(|r| r.score).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &ScoreRecord> {
        self.genuine.iter().chain(&self.impostor)
    }
}

fn attest_len(what: &'static str, expected: u64, actual: usize) -> Result<()> {
    if actual as u64 != expected {
        return Err(Error::Consistency {
            what,
            expected,
            actual: actual as u64,
        });
    }
    Ok(())
}

/// Runs one verification test on `target`.
///
/// The genuine side is the same in both modes. Random mode ignores
/// `attack_dbs`. Pair counts are checked before scoring and again on the
/// scored records; a mismatch is a [`Error::Consistency`] failure.
pub fn run_verification_test<C: Comparator + ?Sized>(
    mode: Mode,
    target: &Database,
    attack_dbs: &[&Database],
    config: &ProtocolConfig,
    matcher: &C,
    cache: &ScoreCache,
    workers: usize,
) -> Result<EvaluationResult> {
    let (n, m) = (target.n(), target.m());
    let attack_ms = match mode {
        Mode::Random => vec![],
        Mode::Skilled => attack_dbs.iter().map(|d| d.m()).collect(),
    };
    config.validate(m, &attack_ms)?;
    let mirrored = config.include_mirrored;
    let genuine_expected = CountAttestation::expected_genuine(n, m, mirrored);
    let impostor_expected = CountAttestation::expected_impostor(mode, n, config.a, config.k, mirrored);

    let mut genuine = genuine_pairs(&target.manifest);
    if mirrored {
        genuine = with_mirrored(genuine);
    }
    attest_len("genuine pairs", genuine_expected, genuine.len())?;

    let store = TemplateStore::with([target]);
    let genuine = compute_score_matrix(matcher, &genuine, &store, cache, workers)?;

    let impostor = match mode {
        Mode::Random => {
            let mut pairs = random_impostor_pairs(&target.manifest, config.a)?;
            if mirrored {
                pairs = with_mirrored(pairs);
            }
            attest_len("impostor pairs", impostor_expected, pairs.len())?;
            compute_score_matrix(matcher, &pairs, &store, cache, workers)?
        }
        Mode::Skilled => skilled_impostor_select(target, attack_dbs, config, matcher, cache, workers)?,
    };

    let attestation = CountAttestation {
        n,
        m,
        a: config.a,
        u: config.u,
        k: config.k,
        include_mirrored: mirrored,
        genuine_expected,
        genuine_actual: genuine.len() as u64,
        impostor_expected,
        impostor_actual: impostor.len() as u64,
    };
    attestation.check()?;

    Ok(EvaluationResult {
        mode,
        target_db: target.name().to_string(),
        config: config.clone(),
        attestation,
        genuine,
        impostor,
    })
}
