//! Skilled-impostor selection: for every target impression, score all
//! candidate impressions from the attack databases and keep the `k` most
//! similar.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use super::{ComparisonPair, FingerKey, Label, ProtocolConfig, ScoreRecord, TemplateKey};
use crate::error::{Error, Result};
use crate::manifest::{Database, DatabaseManifest, TemplateStore};
use crate::matcher::{compute_score_matrix, Comparator, ScoreCache};

/// The candidate comparisons for one target impression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeCandidates {
    pub probe: TemplateKey,
    /// With mirrored comparisons enabled each candidate appears twice, once
    /// per direction.
    pub pairs: Vec<ComparisonPair>,
}

/// Attack databases deduplicated by name, in name order.
fn unique_attack<'a>(attack: impl IntoIterator<Item = &'a DatabaseManifest>) -> Vec<&'a DatabaseManifest> {
    let mut by_name = BTreeMap::new();
    for m in attack {
        by_name.entry(m.name.as_str()).or_insert(m);
    }
    by_name.into_values().collect()
}

/// Lists, per target impression `(i, j ≤ a)`, every impression `y ≤ u` of
/// every attack finger other than finger `i` of the target database and
/// fingers linked to it in the exclusion set.
pub fn skilled_candidates(
    target: &DatabaseManifest,
    attack_dbs: &[&DatabaseManifest],
    config: &ProtocolConfig,
) -> Result<Vec<ProbeCandidates>> {
    if attack_dbs.is_empty() {
        return Err(Error::Config("skilled protocol needs at least one attack database".into()));
    }
    let attack = unique_attack(attack_dbs.iter().copied());
    config.validate(target.m, &attack.iter().map(|m| m.m).collect::<Vec<_>>())?;

    let mut out = Vec::with_capacity((target.n * config.a) as usize);
    for i in 1..=target.n {
        let target_finger = FingerKey::new(&target.name, i);
        let allowed = attack
            .iter()
            .flat_map(|db| (1..=db.n).map(move |x| (*db, x)))
            .filter(|(db, x)| {
                let same = db.name == target.name && *x == i;
                !same && !config.exclusions.contains(&target_finger, &FingerKey::new(&db.name, *x))
            })
            .collect::<Vec<_>>();
        for j in 1..=config.a {
            let probe = TemplateKey::new(&target.name, i, j);
            let mut pairs = Vec::with_capacity(allowed.len() * config.u as usize);
            for (db, x) in &allowed {
                for y in 1..=config.u {
                    let pair = ComparisonPair::new(
                        probe.clone(),
                        TemplateKey::new(&db.name, *x, y),
                        Label::Impostor,
                    );
                    if config.include_mirrored {
                        let r = pair.reversed();
                        pairs.push(pair);
                        pairs.push(r);
                    } else {
                        pairs.push(pair);
                    }
                }
            }
            if pairs.len() < config.k as usize {
                return Err(Error::Selection {
                    probe,
                    available: pairs.len(),
                    k: config.k as usize,
                });
            }
            out.push(ProbeCandidates { probe, pairs });
        }
    }
    Ok(out)
}

/// Runs the skilled-impostor search and returns `n · a · k` records, grouped
/// by target impression and ranked by descending score.
///
/// Ties are broken by candidate database name, finger, then impression
/// (and forward direction before mirrored).
pub fn skilled_impostor_select<C: Comparator + ?Sized>(
    target: &Database,
    attack_dbs: &[&Database],
    config: &ProtocolConfig,
    matcher: &C,
    cache: &ScoreCache,
    workers: usize,
) -> Result<Vec<ScoreRecord>> {
    let manifests = attack_dbs.iter().map(|d| &d.manifest).collect::<Vec<_>>();
    let groups = skilled_candidates(&target.manifest, &manifests, config)?;

    let mut store = TemplateStore::new();
    store.insert(target);
    for db in attack_dbs {
        store.insert(db);
    }

    let flat = groups
        .iter()
        .flat_map(|g| g.pairs.iter().cloned())
        .collect::<Vec<_>>();
    let mut scored = compute_score_matrix(matcher, &flat, &store, cache, workers)?.into_iter();

    let k = config.k as usize;
    let mut out = Vec::with_capacity(groups.len() * k);
    for group in &groups {
        let mut records = scored.by_ref().take(group.pairs.len()).collect::<Vec<_>>();
        records.sort_by(|a, b| rank_key(&group.probe, a).cmp(&rank_key(&group.probe, b)));
        out.extend(records.into_iter().take(k));
    }
    Ok(out)
}

fn rank_key<'r>(probe: &TemplateKey, r: &'r ScoreRecord) -> (Reverse<crate::matcher::Score>, &'r TemplateKey, bool) {
    let mirrored = r.probe != *probe;
    let candidate = if mirrored { &r.probe } else { &r.gallery };
    (Reverse(r.score), candidate, mirrored)
}
