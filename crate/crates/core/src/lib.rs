//! Evaluation toolkit for fingerprint verification.
//!
//! Implements two verification protocols over a database of `n` fingers with
//! `m` impressions each:
//!
//! * **random impostors** (the traditional zero-effort test): genuine
//!   attempts between all impression pairs of a finger, impostor attempts
//!   between the first `a` impressions of every pair of fingers;
//! * **skilled impostors**: the same genuine attempts, but each target
//!   impression is attacked only by the `k` most similar impressions found
//!   among the first `u` impressions of every other finger in a set of
//!   attack databases.
//!
//! Both feed the same metrics (FMR, FNMR, DET, EER, operating points, attack
//! success), so a threshold tuned on random impostors can be checked against
//! what a selective attacker achieves.

pub mod dedup;
pub mod error;
pub mod manifest;
pub mod matcher;
pub mod metrics;
pub mod protocol;
pub mod template;
pub mod testkit;

pub use error::{Error, Result};
pub use manifest::{load_manifest, Database, DatabaseManifest, ManifestEntry, StoredTemplate, TemplateStore};
pub use matcher::{
    check_symmetry, compute_score_matrix, import_score_matrix, BuiltinParams, Comparator, MatcherHandle, Score,
    ScoreCache, Symmetrized,
};
pub use metrics::{Rate, ScoreSets};
pub use protocol::{
    genuine_pairs, random_impostor_pairs, run_verification_test, skilled_impostor_select, ComparisonPair,
    EvaluationResult, ExclusionSet, FingerKey, Label, Mode, ProtocolConfig, ScoreRecord, TemplateKey,
};
pub use template::{parse_xyt, Minutia, MinutiaKind, MinutiaeTemplate};

/// Crate version, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
