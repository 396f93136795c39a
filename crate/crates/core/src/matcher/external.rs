use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::Score;
use crate::error::{Error, Result};

/// Runs an external program per comparison.
///
/// `command` is split on whitespace; `{probe}` and `{gallery}` inside any
/// argument are replaced with the two template paths. The program must print
/// one decimal number on stdout and exit 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub command: String,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

fn default_concurrency() -> usize {
    4
}

impl ExternalCommand {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalCommand {
            command: command.into(),
            max_concurrency: default_concurrency(),
        }
    }

    pub fn argv(&self, probe: &Path, gallery: &Path) -> Vec<String> {
        let probe = probe.to_string_lossy();
        let gallery = gallery.to_string_lossy();
        self.command
            .split_whitespace()
            .map(|tok| tok.replace("{probe}", &probe).replace("{gallery}", &gallery))
            .collect()
    }

    pub fn compare(&self, probe: &Path, gallery: &Path) -> Result<Score> {
        let argv = self.argv(probe, gallery);
        let Some((program, args)) = argv.split_first() else {
            return Err(Error::Config("empty external matcher command".into()));
        };
        let output = Command::new(program).args(args).output().map_err(|e| Error::Matcher {
            message: format!("could not start {program}: {e}"),
            transcript: format!("$ {}", argv.join(" ")),
        })?;
        let stdout = String::from_utf8_lossy(&output.stdout);
        let transcript = || {
            format!(
                "$ {}\nstatus: {}\nstdout: {}\nstderr: {}",
                argv.join(" "),
                output.status,
                stdout.trim_end(),
                String::from_utf8_lossy(&output.stderr).trim_end()
            )
        };
        if !output.status.success() {
            return Err(Error::Matcher {
                message: "external matcher exited unsuccessfully".into(),
                transcript: transcript(),
            });
        }
        let value = stdout.trim().parse::<f64>().map_err(|_| Error::Matcher {
            message: "external matcher output is not a number".into(),
            transcript: transcript(),
        })?;
        Score::new(value).map_err(|e| Error::Matcher {
            message: e.to_string(),
            transcript: transcript(),
        })
    }
}
