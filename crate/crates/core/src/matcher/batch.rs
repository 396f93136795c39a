use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::RwLock;

use rayon::prelude::*;

use super::{Comparator, Score, ScoreMatrix};
use crate::error::{Error, Result};
use crate::manifest::TemplateStore;
use crate::protocol::{ComparisonPair, ScoreRecord, TemplateKey};

type PairMap = HashMap<(TemplateKey, TemplateKey), Score>;

/// Scores keyed by `(matcher fingerprint, probe, gallery)`.
///
/// Reads run concurrently; inserts take the write lock once per batch.
#[derive(Debug, Default)]
pub struct ScoreCache {
    entries: RwLock<HashMap<String, PairMap>>,
}

impl ScoreCache {
    pub fn new() -> Self {
        ScoreCache::default()
    }

    pub fn get(&self, fingerprint: &str, probe: &TemplateKey, gallery: &TemplateKey) -> Option<Score> {
        let guard = self.entries.read().expect("cache lock");
        guard
            .get(fingerprint)?
            .get(&(probe.clone(), gallery.clone()))
            .copied()
    }

    pub fn insert_many(&self, fingerprint: &str, scores: impl IntoIterator<Item = (TemplateKey, TemplateKey, Score)>) {
        let mut guard = self.entries.write().expect("cache lock");
        let map = guard.entry(fingerprint.to_string()).or_default();
        for (p, g, s) in scores {
            map.insert((p, g), s);
        }
    }

    pub fn len(&self, fingerprint: &str) -> usize {
        let guard = self.entries.read().expect("cache lock");
        guard.get(fingerprint).map_or(0, HashMap::len)
    }

    pub fn is_empty(&self) -> bool {
        let guard = self.entries.read().expect("cache lock");
        guard.values().all(HashMap::is_empty)
    }

    /// Snapshot of one matcher's scores as a score matrix.
    pub fn to_matrix(&self, fingerprint: &str) -> ScoreMatrix {
        let guard = self.entries.read().expect("cache lock");
        let mut matrix = ScoreMatrix::new();
        if let Some(map) = guard.get(fingerprint) {
            for ((p, g), s) in map {
                matrix
                    .insert(p.clone(), g.clone(), *s)
                    .expect("cache holds one score per pair");
            }
        }
        matrix
    }

    /// Persists one matcher's scores in score-matrix CSV form.
    pub fn save_csv(&self, fingerprint: &str, path: &Path) -> Result<()> {
        self.to_matrix(fingerprint).write_csv(path)
    }

    /// Loads a score-matrix CSV into the cache under `fingerprint`. A missing
    /// file is not an error.
    pub fn load_csv(&self, fingerprint: &str, path: &Path) -> Result<usize> {
        if !path.exists() {
            return Ok(0);
        }
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let matrix = ScoreMatrix::read_csv(file)?;
        let n = matrix.len();
        self.insert_many(
            fingerprint,
            matrix.iter().map(|(p, g, s)| (p.clone(), g.clone(), s)),
        );
        Ok(n)
    }
}

fn run_in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Scores every pair, in input order, using up to `workers` threads
/// (0 = one per core).
///
/// Cached scores are reused; fresh ones are added to `cache`. On failure the
/// successfully computed scores stay cached and the error names the first
/// failing pair in input order.
pub fn compute_score_matrix<C: Comparator + ?Sized>(
    matcher: &C,
    pairs: &[ComparisonPair],
    store: &TemplateStore<'_>,
    cache: &ScoreCache,
    workers: usize,
) -> Result<Vec<ScoreRecord>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let fingerprint = matcher.fingerprint();

    let mut resolved = Vec::with_capacity(pairs.len());
    for pair in pairs {
        resolved.push((store.get(&pair.probe)?, store.get(&pair.gallery)?));
    }

    let cached = pairs
        .iter()
        .map(|p| cache.get(&fingerprint, &p.probe, &p.gallery))
        .collect::<Vec<_>>();
    // a pair listed twice in one batch is scored once, at its first position
    let mut first_seen: HashMap<(&TemplateKey, &TemplateKey), usize> = HashMap::new();
    let mut origin = Vec::with_capacity(pairs.len());
    let mut todo = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let first = *first_seen.entry((&p.probe, &p.gallery)).or_insert(i);
        origin.push(first);
        if first == i && cached[i].is_none() {
            todo.push(i);
        }
    }

    let threads = match matcher.max_concurrency() {
        Some(limit) if workers == 0 => limit,
        Some(limit) => workers.min(limit),
        None => workers,
    };
    let fresh = run_in_pool(threads, || {
        todo.par_iter()
            .map(|&i| {
                let (probe, gallery) = resolved[i];
                matcher.compare(probe, gallery)
            })
            .collect::<Vec<_>>()
    });

    cache.insert_many(
        &fingerprint,
        todo.iter().zip(&fresh).filter_map(|(&i, r)| {
            r.as_ref()
                .ok()
                .map(|s| (pairs[i].probe.clone(), pairs[i].gallery.clone(), *s))
        }),
    );

    let mut scores = cached;
    for (&i, result) in todo.iter().zip(fresh) {
        match result {
            Ok(s) => scores[i] = Some(s),
            Err(source) => {
                return Err(Error::Batch {
                    probe: pairs[i].probe.clone(),
                    gallery: pairs[i].gallery.clone(),
                    source: Box::new(source),
                })
            }
        }
    }
    for i in 0..scores.len() {
        if scores[i].is_none() {
            scores[i] = scores[origin[i]];
        }
    }

    Ok(pairs
        .iter()
        .zip(scores)
        .map(|(pair, score)| ScoreRecord {
            probe: pair.probe.clone(),
            gallery: pair.gallery.clone(),
            label: pair.label,
            score: score.expect("every pair scored"),
        })
        .collect())
}
