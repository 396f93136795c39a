use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fpeval_core::dedup::{
    apply_review, build_exclusions, cross_database_pairs, duplicates_csv, find_duplicates, pending_review,
    read_duplicates_csv, DuplicateCandidate,
};
use fpeval_core::matcher::{SymmetryReport, SymmetryVerdict};
use fpeval_core::metrics::{attack_success_rate, det_csv, fmr, percentile, Rate};
use fpeval_core::protocol::{read_scores_csv, write_pairs_csv, write_scores_csv};
use fpeval_core::testkit::{default_finger_seeds, synth_database_with_fingers, write_database, SynthParams};
use fpeval_core::{
    check_symmetry, compute_score_matrix, genuine_pairs, load_manifest, random_impostor_pairs, run_verification_test,
    Comparator, Database, DatabaseManifest, Error, ExclusionSet, Label, MatcherHandle, Mode, ProtocolConfig, Score,
    ScoreCache, ScoreSets, TemplateStore,
};
use log::{info, warn};

use crate::config::{load_database, load_databases, RunConfig, SymmetryPolicy};
use crate::error::{CliError, CliResult};
use crate::report::{
    compute_metrics, Artifacts, EvaluationReport, MatcherInfo, ProtocolOut, SymmetryOut, ToolInfo, DET_FILE,
    DUPLICATES_FILE, EXCLUSIONS_FILE, PAIRS_FILE, REPORT_FILE, SCORES_FILE,
};

/// Exclusive claim on an output directory, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Locked(dir.display().to_string()))
            }
            Err(e) => Err(Error::io(&path, e).into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Matcher plus the on-disk score cache, when one is configured.
struct Scorer {
    matcher: MatcherHandle,
    cache: ScoreCache,
    cache_file: Option<PathBuf>,
}

impl Scorer {
    fn new(cfg: &RunConfig) -> CliResult<Self> {
        let matcher = cfg.matcher.build()?;
        let cache = ScoreCache::new();
        let cache_file = match &cfg.cache_dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let file = dir.join(format!("{}.csv", matcher.fingerprint()));
                let n = cache.load_csv(&matcher.fingerprint(), &file)?;
                info!("loaded {n} cached scores from {}", file.display());
                Some(file)
            }
            None => None,
        };
        Ok(Scorer {
            matcher,
            cache,
            cache_file,
        })
    }

    fn persist(&self) -> CliResult<()> {
        if let Some(file) = &self.cache_file {
            self.cache.save_csv(&self.matcher.fingerprint(), file)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- scan

pub fn cmd_scan(root: &Path, n: u32, m: u32, naming: &str, out: Option<&Path>) -> CliResult<DatabaseManifest> {
    if n == 0 || m == 0 {
        return Err(CliError::Usage("n and m must be at least 1".into()));
    }
    let manifest = load_manifest(root, naming, n, m)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| root.join("manifest.json"));
    manifest.write_json(&out)?;
    Ok(manifest)
}

// ---------------------------------------------------------------- synth

/// Planting: the first `count` fingers reuse the finger seeds of a database
/// synthesized with `seed`, so the two share those physical fingers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedFingers {
    pub seed: u64,
    pub count: u32,
}

pub fn cmd_synth(
    params: &SynthParams,
    name: &str,
    n: u32,
    m: u32,
    out: &Path,
    shared: Option<SharedFingers>,
) -> CliResult<DatabaseManifest> {
    if n == 0 || m == 0 {
        return Err(CliError::Usage("n and m must be at least 1".into()));
    }
    let mut seeds = default_finger_seeds(params.seed, n);
    if let Some(sh) = shared {
        if sh.count > n {
            return Err(CliError::Usage(format!("cannot share {} of {n} fingers", sh.count)));
        }
        let donor = default_finger_seeds(sh.seed, sh.count);
        seeds[..sh.count as usize].copy_from_slice(&donor);
    }
    let db = synth_database_with_fingers(params, name, &seeds, m)?;
    Ok(write_database(&db, out)?)
}

// ---------------------------------------------------------------- eval

/// Spreads `count` sample pairs evenly over the target's random-impostor
/// pairs (genuine pairs when there is only one finger).
fn symmetry_sample(target: &Database, count: usize) -> CliResult<Vec<fpeval_core::ComparisonPair>> {
    let pool = if target.n() >= 2 {
        random_impostor_pairs(&target.manifest, 1)?
    } else {
        genuine_pairs(&target.manifest)
    };
    if pool.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    let count = count.min(pool.len());
    Ok((0..count).map(|i| pool[i * pool.len() / count].clone()).collect())
}

fn run_symmetry_check<C: Comparator + ?Sized>(
    matcher: &C,
    target: &Database,
    cfg: &RunConfig,
) -> CliResult<SymmetryReport> {
    let sample = symmetry_sample(target, cfg.symmetry.sample_pairs)?;
    if sample.is_empty() {
        return Ok(SymmetryReport {
            tolerance: cfg.symmetry.tolerance,
            deviations: Vec::new(),
            max_deviation: 0.0,
            verdict: SymmetryVerdict::Unknown,
        });
    }
    let store = TemplateStore::with([target]);
    Ok(check_symmetry(matcher, &sample, &store, cfg.symmetry.tolerance)?)
}

fn protocol_config(cfg: &RunConfig, target: &Database, exclusions: ExclusionSet) -> ProtocolConfig {
    let m = target.m();
    ProtocolConfig {
        a: cfg.protocol.a.unwrap_or(m),
        u: cfg.protocol.u.unwrap_or(m),
        k: cfg.protocol.k,
        exclusions,
        include_mirrored: cfg.protocol.include_mirrored,
    }
}

/// Runs one protocol end to end and writes `report.json`, `scores.csv`,
/// `pairs.csv`, `det.csv` and `exclusions.json` into the output directory.
///
/// All configuration is validated and every database loaded before the
/// first comparison.
pub fn cmd_eval(cfg: &RunConfig, mode: Mode) -> CliResult<EvaluationReport> {
    cfg.validate()?;
    let out_dir = cfg.output_dir()?.to_path_buf();
    let target = load_database(cfg.target()?)?;
    let attack_refs = if cfg.attack_dbs.is_empty() {
        vec![cfg.target()?.to_path_buf()]
    } else {
        cfg.attack_dbs.clone()
    };
    let attack_loaded = match mode {
        Mode::Skilled => load_databases(&attack_refs)?,
        Mode::Random => Vec::new(),
    };
    // the target may be listed among the attack dbs; reuse the loaded copy
    let attack: Vec<&Database> = attack_loaded
        .iter()
        .map(|d| if d.name() == target.name() { &target } else { d })
        .collect();
    let exclusions = cfg.load_exclusions()?;
    let mut protocol = protocol_config(cfg, &target, exclusions);
    let attack_ms = attack.iter().map(|d| d.m()).collect::<Vec<_>>();
    protocol.validate(target.m(), if mode == Mode::Skilled { &attack_ms } else { &[] })?;
    let scorer = Scorer::new(cfg)?;
    let _lock = OutputLock::acquire(&out_dir)?;

    let symmetry = run_symmetry_check(&scorer.matcher, &target, cfg)?;
    let mut forced = false;
    if symmetry.verdict == SymmetryVerdict::Asymmetric && !protocol.include_mirrored {
        match cfg.symmetry.policy {
            SymmetryPolicy::ForceMirrored => {
                warn!(
                    "matcher is asymmetric (max deviation {}); scoring mirrored comparisons too",
                    symmetry.max_deviation
                );
                protocol.include_mirrored = true;
                forced = true;
            }
            SymmetryPolicy::Warn => warn!(
                "matcher is asymmetric (max deviation {}); mirrored comparisons stay off",
                symmetry.max_deviation
            ),
        }
    } else if symmetry.verdict == SymmetryVerdict::Unknown {
        warn!("matcher symmetry could not be established");
    }

    let outcome = run_verification_test(mode, &target, &attack, &protocol, &scorer.matcher, &scorer.cache, cfg.workers);
    scorer.persist()?;
    let result = outcome?;
    let metrics = compute_metrics(&result, &cfg.fmr_bounds, &cfg.success_thresholds)?;

    write_with(&out_dir.join(SCORES_FILE), |w| write_scores_csv(w, result.records()))?;
    write_with(&out_dir.join(PAIRS_FILE), |w| {
        write_pairs_csv(w, result.records().map(|r| (&r.probe, &r.gallery, r.label)))
    })?;
    write_file(&out_dir.join(DET_FILE), det_csv(&metrics.det).as_bytes())?;
    write_file(&out_dir.join(EXCLUSIONS_FILE), format!("{}\n", protocol.exclusions.to_json()).as_bytes())?;

    let report = EvaluationReport {
        tool: ToolInfo {
            name: "fpeval".into(),
            version: fpeval_core::VERSION.into(),
        },
        mode,
        target_db: target.name().to_string(),
        attack_dbs: attack.iter().map(|d| d.name().to_string()).collect(),
        matcher: MatcherInfo {
            spec: cfg.matcher.clone(),
            fingerprint: scorer.matcher.fingerprint(),
        },
        protocol: ProtocolOut {
            a: protocol.a,
            u: protocol.u,
            k: protocol.k,
            include_mirrored: protocol.include_mirrored,
            exclusion_links: protocol.exclusions.len(),
        },
        symmetry: SymmetryOut::new(cfg.symmetry.policy, &symmetry, forced),
        counts: result.attestation.clone(),
        eer: (&metrics.eer).into(),
        operating_points: metrics.operating_points.iter().map(Into::into).collect(),
        attack_success: metrics.attack_success.iter().map(Into::into).collect(),
        artifacts: Artifacts {
            scores: SCORES_FILE.into(),
            pairs: PAIRS_FILE.into(),
            det: DET_FILE.into(),
            exclusions: EXCLUSIONS_FILE.into(),
        },
    };
    write_file(&out_dir.join(REPORT_FILE), report.to_json().as_bytes())?;
    Ok(report)
}

// ---------------------------------------------------------------- compare-modes

#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub threshold: f64,
    pub random_fmr: Rate,
    pub skilled_success: Rate,
    /// `skilled / random`; `None` when both are zero, infinite when only the
    /// random rate is zero.
    pub inflation: Option<f64>,
}

impl ModeComparison {
    pub fn summary(&self) -> String {
        let factor = match self.inflation {
            Some(f) if f.is_infinite() => "unbounded (random FMR is 0)".to_string(),
            Some(f) => fpeval_core::metrics::format_sig12(f),
            None => "undefined (both rates are 0)".to_string(),
        };
        format!(
            "threshold {}\nrandom impostor FMR      {} ({}/{})\nskilled attack success   {} ({}/{})\ninflation factor         {}\n",
            fpeval_core::metrics::format_sig12(self.threshold),
            self.random_fmr,
            self.random_fmr.count,
            self.random_fmr.total,
            self.skilled_success,
            self.skilled_success.count,
            self.skilled_success.total,
            factor
        )
    }
}

pub fn inflation_factor(random: Rate, skilled: Rate) -> Option<f64> {
    match (random.count, skilled.count) {
        (0, 0) => None,
        (0, _) => Some(f64::INFINITY),
        _ => Some((skilled.count as f64 * random.total as f64) / (skilled.total as f64 * random.count as f64)),
    }
}

fn read_run(path: &Path) -> CliResult<(EvaluationReport, PathBuf)> {
    let report_path = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let dir = report_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let report = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: report_path.clone(),
        source: e,
    })?;
    Ok((report, dir))
}

fn read_impostor_scores(dir: &Path, report: &EvaluationReport) -> CliResult<Vec<Score>> {
    let path = dir.join(&report.artifacts.scores);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(read_scores_csv(file)?
        .into_iter()
        .filter(|r| r.label == Label::Impostor)
        .map(|r| r.score)
        .collect())
}

/// Compares a random-impostor run with a skilled-impostor run at threshold
/// `t` (default: the random run's FMR1000 threshold), reading the persisted
/// score records of both.
pub fn cmd_compare_modes(random_run: &Path, skilled_run: &Path, t: Option<f64>) -> CliResult<ModeComparison> {
    let (random, random_dir) = read_run(random_run)?;
    let (skilled, skilled_dir) = read_run(skilled_run)?;
    if random.matcher.fingerprint != skilled.matcher.fingerprint {
        return Err(CliError::Mismatch(format!(
            "matcher {} vs {}",
            random.matcher.fingerprint, skilled.matcher.fingerprint
        )));
    }
    if random.target_db != skilled.target_db {
        return Err(CliError::Mismatch(format!(
            "target database {} vs {}",
            random.target_db, skilled.target_db
        )));
    }
    let threshold = match t {
        Some(t) => t,
        None => {
            random
                .fmr1000()
                .ok_or_else(|| CliError::Usage("random report has no FMR1000 point".into()))?
                .threshold_exact
        }
    };
    let random_scores = read_impostor_scores(&random_dir, &random)?;
    let skilled_scores = read_impostor_scores(&skilled_dir, &skilled)?;
    let random_fmr = fmr(&ScoreSets::new([], random_scores), threshold)?;
    let skilled_success = attack_success_rate(&skilled_scores, threshold)?.rate;
    Ok(ModeComparison {
        threshold,
        random_fmr,
        skilled_success,
        inflation: inflation_factor(random_fmr, skilled_success),
    })
}

// ---------------------------------------------------------------- dedup

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub threshold: f64,
    pub candidates: Vec<DuplicateCandidate>,
    pub exclusions: ExclusionSet,
}

impl DedupOutcome {
    pub fn pending(&self) -> usize {
        pending_review(&self.candidates)
    }
}

/// Scores every cross-database finger pair, flags duplicates and writes
/// `duplicates.csv` and `exclusions.json`. Verdicts from an earlier
/// `duplicates.csv` are carried over.
pub fn cmd_dedup(cfg: &RunConfig) -> CliResult<DedupOutcome> {
    cfg.validate()?;
    let out_dir = cfg.output_dir()?.to_path_buf();
    let refs = if cfg.dedup.dbs.is_empty() {
        let mut v = cfg.target_db.iter().cloned().collect::<Vec<_>>();
        v.extend(cfg.attack_dbs.iter().cloned());
        v
    } else {
        cfg.dedup.dbs.clone()
    };
    let dbs = load_databases(&refs)?;
    if dbs.len() < 2 {
        return Err(CliError::Usage("dedup needs at least two distinct databases".into()));
    }
    let review_path = cfg
        .dedup
        .review_file
        .clone()
        .unwrap_or_else(|| out_dir.join(DUPLICATES_FILE));
    let reviewed = if review_path.exists() {
        let file = fs::File::open(&review_path).map_err(|e| Error::io(&review_path, e))?;
        read_duplicates_csv(file)?
    } else {
        Vec::new()
    };
    let scorer = Scorer::new(cfg)?;
    let _lock = OutputLock::acquire(&out_dir)?;
    let store = TemplateStore::with(dbs.iter());

    let outcome = (|| -> CliResult<DedupOutcome> {
        let threshold = match cfg.dedup.threshold {
            Some(t) => t,
            None => {
                let pairs = dbs.iter().flat_map(|d| genuine_pairs(&d.manifest)).collect::<Vec<_>>();
                let genuine = compute_score_matrix(&scorer.matcher, &pairs, &store, &scorer.cache, cfg.workers)?;
                let scores = genuine.iter().map(|r| r.score).collect::<Vec<_>>();
                let t = percentile(&scores, cfg.dedup.genuine_percentile).ok_or_else(|| {
                    CliError::Usage("no genuine scores to derive a duplicate threshold; set dedup.threshold".into())
                })?;
                info!(
                    "duplicate threshold {t} = {}th percentile of {} genuine scores",
                    cfg.dedup.genuine_percentile,
                    scores.len()
                );
                t
            }
        };
        let threshold_score = Score::new(threshold).map_err(CliError::from)?;
        if threshold <= 0.0 {
            return Err(CliError::Usage("duplicate threshold must be positive".into()));
        }
        let mut records = Vec::new();
        for (i, a) in dbs.iter().enumerate() {
            for b in &dbs[i + 1..] {
                let mut pairs = cross_database_pairs(&a.manifest, &b.manifest);
                if cfg.protocol.include_mirrored {
                    pairs = fpeval_core::protocol::with_mirrored(pairs);
                }
                records.extend(compute_score_matrix(&scorer.matcher, &pairs, &store, &scorer.cache, cfg.workers)?);
            }
        }
        let mut candidates = find_duplicates(&records, threshold_score);
        apply_review(&mut candidates, &reviewed);
        let exclusions = build_exclusions(&candidates, cfg.dedup.policy);
        Ok(DedupOutcome {
            threshold,
            candidates,
            exclusions,
        })
    })();
    scorer.persist()?;
    let outcome = outcome?;

    write_file(&out_dir.join(DUPLICATES_FILE), duplicates_csv(&outcome.candidates).as_bytes())?;
    write_file(
        &out_dir.join(EXCLUSIONS_FILE),
        format!("{}\n", outcome.exclusions.to_json()).as_bytes(),
    )?;
    if outcome.pending() > 0 {
        warn!(
            "{} duplicate candidate(s) await review; edit the verdict column of {} and rerun",
            outcome.pending(),
            out_dir.join(DUPLICATES_FILE).display()
        );
    }
    Ok(outcome)
}
