use std::path::PathBuf;

use thiserror::Error;

use crate::protocol::TemplateKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid template: {0}")]
    Validation(String),

    #[error("template set incomplete, missing (finger, impression): {}", format_missing(.missing))]
    Incomplete { missing: Vec<(u32, u32)> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("matcher failed: {message}\n{transcript}")]
    Matcher { message: String, transcript: String },

    #[error("no precomputed score for {probe} -> {gallery}")]
    Lookup {
        probe: TemplateKey,
        gallery: TemplateKey,
    },

    #[error("comparison {probe} -> {gallery} failed: {source}")]
    Batch {
        probe: TemplateKey,
        gallery: TemplateKey,
        #[source]
        source: Box<Error>,
    },

    #[error("score matrix import: {0}")]
    Import(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("probe {probe} has {available} candidates, fewer than k = {k}")]
    Selection {
        probe: TemplateKey,
        available: usize,
        k: usize,
    },

    #[error("count attestation failed for {what}: expected {expected}, got {actual}")]
    Consistency {
        what: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("synthesis: {0}")]
    Generation(String),

    #[error("unknown template {0}")]
    UnknownTemplate(TemplateKey),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Unwraps batch context to the error that caused it.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Batch { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

fn format_missing(missing: &[(u32, u32)]) -> String {
    missing
        .iter()
        .map(|(f, i)| format!("({f},{i})"))
        .collect::<Vec<_>>()
        .join(", ")
}
