//! Seeded synthetic minutiae databases.
//!
//! Minutiae are placed uniformly with a minimum spacing; impressions are
//! rigid transforms of the finger's base template with positional jitter,
//! dropped minutiae and spurious additions. Nothing here models ridge flow.
//! Every output is a pure function of the seeds and parameters.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{expand_naming, Database, DatabaseManifest, ManifestEntry, DEFAULT_NAMING};
use crate::template::{Minutia, MinutiaKind, MinutiaeTemplate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Inclusive range of minutiae per base template.
    pub minutiae_count: (u32, u32),
    pub width: u32,
    pub height: u32,
    /// Minimum distance between base minutiae, px.
    pub min_spacing: f64,
    /// Impression rotation drawn from `±rotation_deg`.
    pub rotation_deg: f64,
    /// Impression translation drawn from `±translation_px` per axis.
    pub translation_px: f64,
    /// Gaussian positional noise per axis, px.
    pub jitter_sigma: f64,
    pub drop_probability: f64,
    /// Inclusive range of spurious minutiae added per impression.
    pub spurious_count: (u32, u32),
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            minutiae_count: (30, 50),
            width: 388,
            height: 374,
            min_spacing: 8.0,
            rotation_deg: 15.0,
            translation_px: 25.0,
            jitter_sigma: 2.0,
            drop_probability: 0.1,
            spurious_count: (0, 5),
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn with_seed(seed: u64) -> Self {
        SynthParams {
            seed,
            ..SynthParams::default()
        }
    }

    /// Parameters under which an impression equals its base template.
    pub fn without_perturbation(self) -> Self {
        SynthParams {
            rotation_deg: 0.0,
            translation_px: 0.0,
            jitter_sigma: 0.0,
            drop_probability: 0.0,
            spurious_count: (0, 0),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Generation(msg));
        if self.minutiae_count.0 > self.minutiae_count.1 || self.minutiae_count.1 == 0 {
            return bad(format!("minutiae_count range {:?} is empty", self.minutiae_count));
        }
        if self.spurious_count.0 > self.spurious_count.1 {
            return bad(format!("spurious_count range {:?} is empty", self.spurious_count));
        }
        if self.width == 0 || self.height == 0 {
            return bad("field must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return bad(format!("drop_probability {} outside [0,1]", self.drop_probability));
        }
        for (name, v) in [
            ("min_spacing", self.min_spacing),
            ("rotation_deg", self.rotation_deg),
            ("translation_px", self.translation_px),
            ("jitter_sigma", self.jitter_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes several values into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

const BASE_STREAM: u64 = 1;
const IMPRESSION_STREAM: u64 = 2;
const FINGER_STREAM: u64 = 3;

fn random_minutia(rng: &mut ChaCha8Rng, x: u32, y: u32) -> Minutia {
    // kind is left unknown: the on-disk text format cannot carry it
    Minutia {
        x,
        y,
        angle: rng.gen_range(0..360),
        kind: MinutiaKind::Unknown,
        quality: rng.gen_range(40..=100),
    }
}

/// Base template of one synthetic finger. Depends only on the field
/// parameters and `finger_seed`, so two databases sharing a finger seed share
/// the finger.
pub fn synth_template(params: &SynthParams, finger_seed: u64) -> Result<MinutiaeTemplate> {
    params.validate()?;
    let mut rng = rng_for(&[BASE_STREAM, finger_seed]);
    let count = rng.gen_range(params.minutiae_count.0..=params.minutiae_count.1) as usize;

    let d = params.min_spacing;
    // hexagonal packing bound on points with mutual distance >= d
    let capacity = if d > 0.0 {
        (params.width as f64 + d) * (params.height as f64 + d) / (d * d * 3f64.sqrt() / 2.0)
    } else {
        f64::INFINITY
    };
    if count as f64 > capacity {
        return Err(Error::Generation(format!(
            "cannot place {count} minutiae {d} px apart in a {}x{} field",
            params.width, params.height
        )));
    }

    let mut minutiae: Vec<Minutia> = Vec::with_capacity(count);
    let mut attempts = 0u32;
    while minutiae.len() < count {
        attempts += 1;
        if attempts > 200_000 {
            return Err(Error::Generation(format!(
                "gave up placing {count} minutiae {d} px apart in a {}x{} field",
                params.width, params.height
            )));
        }
        let x = rng.gen_range(0..params.width);
        let y = rng.gen_range(0..params.height);
        let clear = minutiae.iter().all(|m| {
            let dx = m.x as f64 - x as f64;
            let dy = m.y as f64 - y as f64;
            dx * dx + dy * dy >= d * d
        });
        if clear {
            minutiae.push(random_minutia(&mut rng, x, y));
        }
    }
    let mut t = MinutiaeTemplate::new(finger_seed.to_string(), 1, minutiae);
    t.width = params.width;
    t.height = params.height;
    Ok(t)
}

/// One impression of `base`: seeded rotation about the field centre,
/// translation, jitter, drops and spurious minutiae. Minutiae that leave the
/// field are discarded.
pub fn synth_impression(base: &MinutiaeTemplate, params: &SynthParams, impression_seed: u64) -> MinutiaeTemplate {
    let mut rng = rng_for(&[IMPRESSION_STREAM, impression_seed]);
    let (w, h) = if base.width > 0 && base.height > 0 {
        (base.width, base.height)
    } else {
        (params.width, params.height)
    };
    let rot = rng.gen_range(-params.rotation_deg..=params.rotation_deg);
    let tx = rng.gen_range(-params.translation_px..=params.translation_px);
    let ty = rng.gen_range(-params.translation_px..=params.translation_px);
    let jitter = (params.jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, params.jitter_sigma).expect("valid sigma"));
    let (s, c) = rot.to_radians().sin_cos();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);

    let mut minutiae = Vec::with_capacity(base.minutiae.len() + params.spurious_count.1 as usize);
    for m in &base.minutiae {
        if rng.gen_bool(params.drop_probability) {
            continue;
        }
        let px = m.x as f64 - cx;
        let py = m.y as f64 - cy;
        let mut x = c * px - s * py + cx + tx;
        let mut y = s * px + c * py + cy + ty;
        if let Some(n) = &jitter {
            x += n.sample(&mut rng);
            y += n.sample(&mut rng);
        }
        let (x, y) = (x.round(), y.round());
        if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
            continue;
        }
        let angle = (m.angle as f64 + rot).round().rem_euclid(360.0) as u16 % 360;
        minutiae.push(Minutia {
            x: x as u32,
            y: y as u32,
            angle,
            ..*m
        });
    }
    let extra = rng.gen_range(params.spurious_count.0..=params.spurious_count.1);
    for _ in 0..extra {
        let x = rng.gen_range(0..w);
        let y = rng.gen_range(0..h);
        minutiae.push(random_minutia(&mut rng, x, y));
    }
    MinutiaeTemplate {
        finger_id: base.finger_id.clone(),
        impression_id: base.impression_id,
        minutiae,
        width: w,
        height: h,
        source_db: base.source_db.clone(),
    }
}

/// Shifts every minutia by `margin` px and grows the field to match, so a
/// later rigid motion cannot push coordinates negative.
pub fn pad(t: &MinutiaeTemplate, margin: u32) -> MinutiaeTemplate {
    let mut out = t.clone();
    for m in &mut out.minutiae {
        m.x += margin;
        m.y += margin;
    }
    out.width = t.width + 2 * margin;
    out.height = t.height + 2 * margin;
    out
}

/// Exact rigid motion of `t` about its field centre, rounded to the integer
/// grid. Minutiae landing at negative coordinates are dropped.
pub fn rigid_copy(t: &MinutiaeTemplate, dx: f64, dy: f64, dtheta_deg: f64) -> MinutiaeTemplate {
    let (s, c) = dtheta_deg.to_radians().sin_cos();
    let (cx, cy) = (t.width as f64 / 2.0, t.height as f64 / 2.0);
    let minutiae = t
        .minutiae
        .iter()
        .filter_map(|m| {
            let px = m.x as f64 - cx;
            let py = m.y as f64 - cy;
            let x = (c * px - s * py + cx + dx).round();
            let y = (s * px + c * py + cy + dy).round();
            (x >= 0.0 && y >= 0.0).then(|| Minutia {
                x: x as u32,
                y: y as u32,
                angle: (m.angle as f64 + dtheta_deg).round().rem_euclid(360.0) as u16 % 360,
                ..*m
            })
        })
        .collect();
    MinutiaeTemplate {
        minutiae,
        ..t.clone()
    }
}

/// Finger seeds `1..=n` for a database seeded with `seed`.
pub fn default_finger_seeds(seed: u64, n: u32) -> Vec<u64> {
    (1..=n as u64).map(|i| derive_seed(&[FINGER_STREAM, seed, i])).collect()
}

/// Builds an in-memory database with one finger per entry of
/// `finger_seeds`. Impression noise is seeded from `params.seed`, the finger
/// seed and the impression index.
pub fn synth_database_with_fingers(params: &SynthParams, name: &str, finger_seeds: &[u64], m: u32) -> Result<Database> {
    params.validate()?;
    if finger_seeds.is_empty() || m == 0 {
        return Err(Error::Config("synthetic database needs n >= 1 and m >= 1".into()));
    }
    let n = finger_seeds.len() as u32;
    let per_finger = finger_seeds
        .par_iter()
        .enumerate()
        .map(|(idx, &fs)| {
            let finger = idx as u32 + 1;
            let base = synth_template(params, fs)?;
            Ok((1..=m)
                .map(|j| {
                    let mut t = synth_impression(&base, params, derive_seed(&[params.seed, fs, j as u64]));
                    t.finger_id = finger.to_string();
                    t.impression_id = j;
                    t
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let entries = (1..=n)
        .flat_map(|i| {
            (1..=m).map(move |j| ManifestEntry {
                finger: i,
                impression: j,
                path: PathBuf::from(expand_naming(DEFAULT_NAMING, i, j)),
            })
        })
        .collect();
    let manifest = DatabaseManifest::from_entries(name, n, m, PathBuf::new(), entries)?;
    Database::from_templates(manifest, per_finger.into_iter().flatten().collect())
}

/// `n × m` database with fingers drawn from `params.seed`.
pub fn synth_database(params: &SynthParams, name: &str, n: u32, m: u32) -> Result<Database> {
    if n == 0 {
        return Err(Error::Config("synthetic database needs n >= 1 and m >= 1".into()));
    }
    synth_database_with_fingers(params, name, &default_finger_seeds(params.seed, n), m)
}

/// Writes every template as `<finger>_<impression>.xyt` plus `manifest.json`
/// into `out_dir`, returning the manifest rooted there.
pub fn write_database(db: &Database, out_dir: &Path) -> Result<DatabaseManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (entry, stored) in db.manifest.entries.iter().zip(db.templates()) {
        let path = out_dir.join(&entry.path);
        fs::write(&path, stored.template.to_xyt()).map_err(|e| Error::io(&path, e))?;
    }
    let mut manifest = db.manifest.clone();
    manifest.root = out_dir.to_path_buf();
    manifest.write_json(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
