use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpeval_core::dedup::ExclusionPolicy;
use fpeval_core::Mode;

use crate::config::{MatcherSpec, RunConfig, SymmetryPolicy};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "fpeval", version, about = "Fingerprint verification evaluation with random and skilled impostors")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a directory of .xyt templates into a manifest.
    Scan {
        root: PathBuf,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value = fpeval_core::manifest::DEFAULT_NAMING)]
        naming: String,
        /// Manifest path (default: ROOT/manifest.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic database.
    Synth {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        out: PathBuf,
        /// Database name (default: the output directory name).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON file with generator parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Reuse the first --shared-count fingers of the database with this seed.
        #[arg(long, requires = "shared_count")]
        shared_seed: Option<u64>,
        #[arg(long, requires = "shared_seed")]
        shared_count: Option<u32>,
    },
    /// Run a verification test and write the report.
    Eval {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare a random-impostor run with a skilled-impostor run.
    CompareModes {
        /// Random run directory or its report.json.
        random: PathBuf,
        /// Skilled run directory or its report.json.
        skilled: PathBuf,
        /// Threshold (default: the random run's FMR1000 threshold).
        #[arg(long)]
        t: Option<f64>,
    },
    /// Find fingers enrolled in more than one database.
    Dedup {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Random,
    Skilled,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Random => Mode::Random,
            ModeArg::Skilled => Mode::Skilled,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SymmetryPolicyArg {
    ForceMirrored,
    Warn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DupPolicyArg {
    ConfirmedOnly,
    AllCandidates,
}

/// Run configuration file plus same-named overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub target_db: Option<PathBuf>,
    /// Repeatable; replaces the configured list.
    #[arg(long = "attack-db")]
    pub attack_dbs: Vec<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
    #[arg(long)]
    pub a: Option<u32>,
    #[arg(long)]
    pub u: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub include_mirrored: bool,
    #[arg(long, value_enum)]
    pub symmetry_policy: Option<SymmetryPolicyArg>,
    /// Use an external matcher: `{probe}` and `{gallery}` are replaced by paths.
    #[arg(long)]
    pub matcher_command: Option<String>,
    /// Use a precomputed score matrix CSV.
    #[arg(long, conflicts_with = "matcher_command")]
    pub score_matrix: Option<PathBuf>,
    /// Repeatable; replaces the configured list.
    #[arg(long = "fmr-bound")]
    pub fmr_bounds: Vec<f64>,
    /// Repeatable; replaces the configured list.
    #[arg(long = "success-threshold")]
    pub success_thresholds: Vec<f64>,
    /// Repeatable; databases searched for duplicates.
    #[arg(long = "dup-db")]
    pub dup_dbs: Vec<PathBuf>,
    #[arg(long)]
    pub dup_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub dup_policy: Option<DupPolicyArg>,
    #[arg(long)]
    pub review_file: Option<PathBuf>,
}

impl ConfigArgs {
    /// Loads the configuration file (if any) and applies the overrides.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg);
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        let a = self.clone();
        if let Some(v) = a.target_db {
            cfg.target_db = Some(v);
        }
        if !a.attack_dbs.is_empty() {
            cfg.attack_dbs = a.attack_dbs;
        }
        if let Some(v) = a.output_dir {
            cfg.output_dir = Some(v);
        }
        if let Some(v) = a.workers {
            cfg.workers = v;
        }
        if let Some(v) = a.cache_dir {
            cfg.cache_dir = Some(v);
        }
        if let Some(v) = a.exclusions {
            cfg.exclusions = Some(v);
        }
        if a.a.is_some() {
            cfg.protocol.a = a.a;
        }
        if a.u.is_some() {
            cfg.protocol.u = a.u;
        }
        if let Some(v) = a.k {
            cfg.protocol.k = v;
        }
        if a.include_mirrored {
            cfg.protocol.include_mirrored = true;
        }
        if let Some(p) = a.symmetry_policy {
            cfg.symmetry.policy = match p {
                SymmetryPolicyArg::ForceMirrored => SymmetryPolicy::ForceMirrored,
                SymmetryPolicyArg::Warn => SymmetryPolicy::Warn,
            };
        }
        if let Some(command) = a.matcher_command {
            cfg.matcher = MatcherSpec::ExternalCommand {
                command,
                max_concurrency: 4,
            };
        }
        if let Some(path) = a.score_matrix {
            cfg.matcher = MatcherSpec::Precomputed { path };
        }
        if !a.fmr_bounds.is_empty() {
            cfg.fmr_bounds = a.fmr_bounds;
        }
        if !a.success_thresholds.is_empty() {
            cfg.success_thresholds = a.success_thresholds;
        }
        if !a.dup_dbs.is_empty() {
            cfg.dedup.dbs = a.dup_dbs;
        }
        if a.dup_threshold.is_some() {
            cfg.dedup.threshold = a.dup_threshold;
        }
        if let Some(p) = a.dup_policy {
            cfg.dedup.policy = match p {
                DupPolicyArg::ConfirmedOnly => ExclusionPolicy::ConfirmedOnly,
                DupPolicyArg::AllCandidates => ExclusionPolicy::AllCandidates,
            };
        }
        if let Some(v) = a.review_file {
            cfg.dedup.review_file = Some(v);
        }
    }
}
