use std::fs;
use std::process::ExitCode;

use clap::Parser;
use fpeval_cli::args::{Cli, Command};
use fpeval_cli::commands::{cmd_compare_modes, cmd_dedup, cmd_eval, cmd_scan, cmd_synth, SharedFingers};
use fpeval_cli::error::CliResult;
use fpeval_core::testkit::SynthParams;
use fpeval_core::Error;

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Scan {
            root,
            n,
            m,
            naming,
            out,
        } => {
            let manifest = cmd_scan(&root, n, m, &naming, out.as_deref())?;
            println!("{}: {} templates ({} fingers x {} impressions)", manifest.name, manifest.len(), n, m);
        }
        Command::Synth {
            n,
            m,
            out,
            name,
            seed,
            params,
            shared_seed,
            shared_count,
        } => {
            let mut p = match params {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    serde_json::from_str::<SynthParams>(&text).map_err(|e| Error::Json { path, source: e })?
                }
                None => SynthParams::default(),
            };
            if let Some(s) = seed {
                p.seed = s;
            }
            let name = name.unwrap_or_else(|| {
                out.file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "synthetic".into())
            });
            let shared = shared_seed.zip(shared_count).map(|(seed, count)| SharedFingers { seed, count });
            let manifest = cmd_synth(&p, &name, n, m, &out, shared)?;
            println!("{}: wrote {} templates to {}", manifest.name, manifest.len(), out.display());
        }
        Command::Eval { mode, config } => {
            let cfg = config.resolve()?;
            let report = cmd_eval(&cfg, mode.into())?;
            print!("{}", report.summary());
        }
        Command::CompareModes { random, skilled, t } => {
            let cmp = cmd_compare_modes(&random, &skilled, t)?;
            print!("{}", cmp.summary());
        }
        Command::Dedup { config } => {
            let cfg = config.resolve()?;
            let outcome = cmd_dedup(&cfg)?;
            println!(
                "{} duplicate candidate(s) at threshold {}; {} exclusion link(s)",
                outcome.candidates.len(),
                fpeval_core::metrics::format_sig12(outcome.threshold),
                outcome.exclusions.len()
            );
            for c in &outcome.candidates {
                println!(
                    "  {}:{} ~ {}:{}  best {} at impressions ({}, {})  [{}]",
                    c.finger_a.db,
                    c.finger_a.finger,
                    c.finger_b.db,
                    c.finger_b.finger,
                    c.best_score,
                    c.best_pair.0,
                    c.best_pair.1,
                    c.verdict
                );
            }
            if outcome.pending() > 0 {
                eprintln!(
                    "warning: {} candidate(s) not yet reviewed; they are excluded only under the all_candidates policy",
                    outcome.pending()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(fpeval_cli::exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit()
        }
    }
}

