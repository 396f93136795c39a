//! Run configuration: one JSON file, with every field overridable by a flag.
//!
//! Relative paths in the file resolve against the file's directory; paths
//! given as flags resolve against the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use fpeval_core::dedup::ExclusionPolicy;
use fpeval_core::matcher::{import_score_matrix, ExternalCommand};
use fpeval_core::{BuiltinParams, Database, DatabaseManifest, Error, ExclusionSet, MatcherHandle};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatcherSpec {
    Builtin {
        #[serde(default)]
        params: BuiltinParams,
    },
    ExternalCommand {
        command: String,
        #[serde(default = "default_external_concurrency")]
        max_concurrency: usize,
    },
    Precomputed {
        path: PathBuf,
    },
}

fn default_external_concurrency() -> usize {
    4
}

impl Default for MatcherSpec {
    fn default() -> Self {
        MatcherSpec::Builtin {
            params: BuiltinParams::default(),
        }
    }
}

impl MatcherSpec {
    pub fn build(&self) -> CliResult<MatcherHandle> {
        Ok(match self {
            MatcherSpec::Builtin { params } => MatcherHandle::Builtin(params.clone()),
            MatcherSpec::ExternalCommand {
                command,
                max_concurrency,
            } => {
                if command.split_whitespace().next().is_none() {
                    return Err(CliError::Usage("external matcher command is empty".into()));
                }
                MatcherHandle::External(ExternalCommand {
                    command: command.clone(),
                    max_concurrency: *max_concurrency,
                })
            }
            MatcherSpec::Precomputed { path } => import_score_matrix(path)?,
        })
    }
}

/// Protocol parameters; `a` and `u` default to the target's `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default)]
    pub a: Option<u32>,
    #[serde(default)]
    pub u: Option<u32>,
    #[serde(default = "one")]
    pub k: u32,
    #[serde(default)]
    pub include_mirrored: bool,
}

fn one() -> u32 {
    1
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec {
            a: None,
            u: None,
            k: 1,
            include_mirrored: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryPolicy {
    /// Score mirrored comparisons when the matcher proves asymmetric.
    ForceMirrored,
    /// Log the asymmetry and keep the configured setting.
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    #[serde(default = "default_symmetry_policy")]
    pub policy: SymmetryPolicy,
    #[serde(default = "default_sample_pairs")]
    pub sample_pairs: usize,
    #[serde(default)]
    pub tolerance: f64,
}

fn default_symmetry_policy() -> SymmetryPolicy {
    SymmetryPolicy::ForceMirrored
}

fn default_sample_pairs() -> usize {
    10
}

impl Default for SymmetrySpec {
    fn default() -> Self {
        SymmetrySpec {
            policy: default_symmetry_policy(),
            sample_pairs: default_sample_pairs(),
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupSpec {
    /// Databases searched pairwise; defaults to the target plus attack dbs.
    #[serde(default)]
    pub dbs: Vec<PathBuf>,
    /// Fixed duplicate threshold. When absent the threshold is the
    /// `genuine_percentile`-th percentile of the pooled genuine scores.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_genuine_percentile")]
    pub genuine_percentile: f64,
    #[serde(default)]
    pub policy: ExclusionPolicy,
    /// Earlier duplicate report whose verdicts are carried over; defaults to
    /// `duplicates.csv` in the output directory.
    #[serde(default)]
    pub review_file: Option<PathBuf>,
}

fn default_genuine_percentile() -> f64 {
    1.0
}

impl Default for DedupSpec {
    fn default() -> Self {
        DedupSpec {
            dbs: Vec::new(),
            threshold: None,
            genuine_percentile: default_genuine_percentile(),
            policy: ExclusionPolicy::default(),
            review_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub target_db: Option<PathBuf>,
    /// Skilled-mode candidate sources; defaults to the target itself.
    #[serde(default)]
    pub attack_dbs: Vec<PathBuf>,
    #[serde(default)]
    pub matcher: MatcherSpec,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
    #[serde(default)]
    pub symmetry: SymmetrySpec,
    #[serde(default)]
    pub dedup: DedupSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Scoring threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Extra operating points reported next to FMR1000.
    #[serde(default)]
    pub fmr_bounds: Vec<f64>,
    /// Thresholds at which the attack success rate is reported.
    #[serde(default)]
    pub success_thresholds: Vec<f64>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase_paths(base);
        Ok(cfg)
    }

    fn rebase_paths(&mut self, base: &Path) {
        let RunConfig {
            target_db,
            attack_dbs,
            matcher,
            exclusions,
            dedup,
            output_dir,
            cache_dir,
            ..
        } = self;
        for p in target_db
            .iter_mut()
            .chain(attack_dbs.iter_mut())
            .chain(exclusions.iter_mut())
            .chain(dedup.dbs.iter_mut())
            .chain(dedup.review_file.iter_mut())
            .chain(output_dir.iter_mut())
            .chain(cache_dir.iter_mut())
        {
            rebase(base, p);
        }
        if let MatcherSpec::Precomputed { path } = matcher {
            rebase(base, path);
        }
    }

    pub fn output_dir(&self) -> CliResult<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| CliError::Usage("output_dir is required".into()))
    }

    pub fn target(&self) -> CliResult<&Path> {
        self.target_db
            .as_deref()
            .ok_or_else(|| CliError::Usage("target_db is required".into()))
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> CliResult<()> {
        if self.protocol.k == 0 {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        if self.protocol.a == Some(0) || self.protocol.u == Some(0) {
            return Err(CliError::Usage("a and u must be at least 1".into()));
        }
        for &b in &self.fmr_bounds {
            if !(b > 0.0 && b <= 1.0) {
                return Err(CliError::Usage(format!("fmr bound {b} outside (0, 1]")));
            }
        }
        if self.success_thresholds.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Usage("success thresholds must be finite".into()));
        }
        let p = self.dedup.genuine_percentile;
        if !(0.0..=100.0).contains(&p) {
            return Err(CliError::Usage(format!("genuine_percentile {p} outside [0, 100]")));
        }
        if let Some(t) = self.dedup.threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Usage(format!("dedup threshold {t} must be positive")));
            }
        }
        Ok(())
    }

    pub fn load_exclusions(&self) -> CliResult<ExclusionSet> {
        match &self.exclusions {
            None => Ok(ExclusionSet::new()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Ok(ExclusionSet::from_json(&text)?)
            }
        }
    }
}

/// A manifest reference is either a manifest JSON file or a directory
/// holding `manifest.json`.
pub fn manifest_path(reference: &Path) -> PathBuf {
    if reference.is_dir() {
        reference.join("manifest.json")
    } else {
        reference.to_path_buf()
    }
}

pub fn load_database(reference: &Path) -> CliResult<Database> {
    let manifest = DatabaseManifest::read_json(&manifest_path(reference))?;
    Ok(Database::load(manifest)?)
}

/// Loads every distinct reference once, keeping first-seen order.
pub fn load_databases(references: &[PathBuf]) -> CliResult<Vec<Database>> {
    let mut seen: Vec<PathBuf> = Vec::new();
    let mut out: Vec<Database> = Vec::new();
    for r in references {
        let p = manifest_path(r);
        let canon = p.canonicalize().unwrap_or_else(|_| p.clone());
        if seen.contains(&canon) {
            continue;
        }
        let db = load_database(r)?;
        if out.iter().any(|d| d.name() == db.name()) {
            return Err(CliError::Usage(format!(
                "two different databases are named {:?}; template keys would collide",
                db.name()
            )));
        }
        seen.push(canon);
        out.push(db);
    }
    Ok(out)
}
