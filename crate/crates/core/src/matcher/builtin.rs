//! Built-in minutiae matcher.
//!
//! 1. Every probe × gallery minutia pair votes for a rigid transform
//!    (translation, rotation about the probe centroid) in a quantized
//!    accumulator.
//! 2. The best-voted cell is refined with the median of the votes around it
//!    and applied to the probe.
//! 3. Transformed probe minutiae are greedily paired, in file order, to the
//!    nearest unpaired gallery minutia within the distance and angle
//!    tolerances.
//! 4. `score = 100 · p² / (n_probe · n_gallery)` for `p` paired minutiae.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::Score;
use crate::template::{Minutia, MinutiaeTemplate, MIN_ALIGNABLE_MINUTIAE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuiltinParams {
    /// Accumulator cell size for translation, px.
    pub bin_xy: f64,
    /// Accumulator cell size for rotation, degrees. Should divide 360.
    pub bin_angle: f64,
    /// Max distance between paired minutiae after alignment, px.
    pub pair_radius: f64,
    /// Max direction difference between paired minutiae, degrees.
    pub pair_angle: f64,
    /// Weight each pairing by `sqrt(q_probe · q_gallery) / 100`.
    pub quality_weighting: bool,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams {
            bin_xy: 10.0,
            bin_angle: 10.0,
            pair_radius: 12.0,
            pair_angle: 20.0,
            quality_weighting: false,
        }
    }
}

/// A rigid motion: rotate about `center`, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rigid {
    pub center: (f64, f64),
    pub rotation_deg: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Rigid {
    fn apply(&self, m: &Minutia) -> (f64, f64, f64) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let px = m.x as f64 - self.center.0;
        let py = m.y as f64 - self.center.1;
        let x = c * px - s * py + self.center.0 + self.dx;
        let y = s * px + c * py + self.center.1 + self.dy;
        let angle = (m.angle as f64 + self.rotation_deg).rem_euclid(360.0);
        (x, y, angle)
    }
}

#[derive(Debug, Clone, Copy)]
struct Vote {
    cell: (i32, i32, i32),
    dx: f64,
    dy: f64,
    /// Rotation in (-180, 180].
    dtheta: i32,
    probe: usize,
    gallery: usize,
}

fn sin_cos_table() -> &'static [(f64, f64); 360] {
    static TABLE: OnceLock<[(f64, f64); 360]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [(0.0, 0.0); 360];
        for (deg, slot) in t.iter_mut().enumerate() {
            *slot = (deg as f64).to_radians().sin_cos();
        }
        t
    })
}

/// Signed difference `to - from` in degrees, in (-180, 180].
fn signed_delta(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn centroid(ms: &[Minutia]) -> (f64, f64) {
    let n = ms.len() as f64;
    let (sx, sy) = ms
        .iter()
        .fold((0.0, 0.0), |(sx, sy), m| (sx + m.x as f64, sy + m.y as f64));
    (sx / n, sy / n)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Round half away from zero; avoids the libm call behind `f64::round` in
/// the voting loop. Inputs are far inside `i32` range.
#[inline]
fn round_i32(x: f64) -> i32 {
    (x + 0.5f64.copysign(x)) as i32
}

fn cast_votes(params: &BuiltinParams, probe: &[Minutia], gallery: &[Minutia], center: (f64, f64)) -> Vec<Vote> {
    let table = sin_cos_table();
    let angle_bins = (360.0 / params.bin_angle).round().max(1.0) as i32;
    let mut votes = Vec::with_capacity(probe.len() * gallery.len());
    for (pi, p) in probe.iter().enumerate() {
        let px = p.x as f64 - center.0;
        let py = p.y as f64 - center.1;
        for (gi, g) in gallery.iter().enumerate() {
            let raw = (g.angle as i32 - p.angle as i32).rem_euclid(360);
            let (s, c) = table[raw as usize];
            let dtheta = if raw > 180 { raw - 360 } else { raw };
            let dx = g.x as f64 - (c * px - s * py + center.0);
            let dy = g.y as f64 - (s * px + c * py + center.1);
            let mut bt = round_i32(dtheta as f64 / params.bin_angle);
            bt = bt.rem_euclid(angle_bins);
            if bt > angle_bins / 2 {
                bt -= angle_bins;
            }
            let cell = (round_i32(dx / params.bin_xy), round_i32(dy / params.bin_xy), bt);
            votes.push(Vote {
                cell,
                dx,
                dy,
                dtheta,
                probe: pi,
                gallery: gi,
            });
        }
    }
    votes
}

const CELL_OFFSET: i64 = 1 << 20;

fn pack(cell: (i32, i32, i32)) -> u64 {
    let f = |v: i32| (v as i64 + CELL_OFFSET) as u64 & 0x1F_FFFF;
    (f(cell.0) << 42) | (f(cell.1) << 21) | f(cell.2)
}

fn unpack(code: u64) -> (i32, i32, i32) {
    let f = |v: u64| ((v & 0x1F_FFFF) as i64 - CELL_OFFSET) as i32;
    (f(code >> 42), f(code >> 21), f(code))
}

/// Most-voted cell; ties go to the smallest `(|bx| + |by|, |bθ|)`, then the
/// lexicographically smallest cell.
fn best_cell(votes: &[Vote]) -> (i32, i32, i32) {
    let mut codes = votes.iter().map(|v| pack(v.cell)).collect::<Vec<_>>();
    codes.sort_unstable();
    let rank = |cell: (i32, i32, i32)| (cell.0.abs() + cell.1.abs(), cell.2.abs(), cell);
    let mut best: Option<(usize, (i32, i32, i32))> = None;
    for run in codes.chunk_by(|a, b| a == b) {
        let cell = unpack(run[0]);
        let count = run.len();
        let better = match best {
            None => true,
            Some((bc, bcell)) => count > bc || (count == bc && rank(cell) < rank(bcell)),
        };
        if better {
            best = Some((count, cell));
        }
    }
    best.map(|(_, c)| c).unwrap_or((0, 0, 0))
}

fn estimate_transform(params: &BuiltinParams, probe: &[Minutia], gallery: &[Minutia]) -> Rigid {
    let center = centroid(probe);
    let votes = cast_votes(params, probe, gallery, center);
    let cell = best_cell(&votes);

    let cx = cell.0 as f64 * params.bin_xy;
    let cy = cell.1 as f64 * params.bin_xy;
    let ct = cell.2 as f64 * params.bin_angle;
    let reach_xy = 1.5 * params.bin_xy;
    let reach_t = 1.5 * params.bin_angle;
    let support = votes
        .iter()
        .filter(|v| {
            (v.dx - cx).abs() <= reach_xy
                && (v.dy - cy).abs() <= reach_xy
                && signed_delta(ct, v.dtheta as f64).abs() <= reach_t
        })
        .collect::<Vec<_>>();
    if support.is_empty() {
        return Rigid {
            center,
            rotation_deg: ct,
            dx: cx,
            dy: cy,
        };
    }

    let mut offsets = support
        .iter()
        .map(|v| signed_delta(ct, v.dtheta as f64))
        .collect::<Vec<_>>();
    let rotation_deg = ct + median(&mut offsets);

    // translation re-estimated under the common rotation
    let (s, c) = rotation_deg.to_radians().sin_cos();
    let mut txs = Vec::with_capacity(support.len());
    let mut tys = Vec::with_capacity(support.len());
    for v in &support {
        let p = &probe[v.probe];
        let g = &gallery[v.gallery];
        let px = p.x as f64 - center.0;
        let py = p.y as f64 - center.1;
        txs.push(g.x as f64 - (c * px - s * py + center.0));
        tys.push(g.y as f64 - (s * px + c * py + center.1));
    }
    Rigid {
        center,
        rotation_deg,
        dx: median(&mut txs),
        dy: median(&mut tys),
    }
}

/// Scores `gallery` against `probe` with the built-in algorithm. Always in
/// `[0, 100]`; zero when either side has fewer than four minutiae.
pub fn compare_templates(params: &BuiltinParams, probe: &MinutiaeTemplate, gallery: &MinutiaeTemplate) -> Score {
    let (pm, gm) = (&probe.minutiae, &gallery.minutiae);
    if pm.len() < MIN_ALIGNABLE_MINUTIAE || gm.len() < MIN_ALIGNABLE_MINUTIAE {
        return Score::ZERO;
    }
    let rigid = estimate_transform(params, pm, gm);
    let paired = pair_minutiae(params, &rigid, pm, gm);
    let value = 100.0 * paired * paired / (pm.len() as f64 * gm.len() as f64);
    Score::new(value.min(100.0)).expect("bounded score")
}

fn pair_minutiae(params: &BuiltinParams, rigid: &Rigid, probe: &[Minutia], gallery: &[Minutia]) -> f64 {
    let r2 = params.pair_radius * params.pair_radius;
    let mut taken = vec![false; gallery.len()];
    let mut paired = 0.0;
    for p in probe {
        let (x, y, angle) = rigid.apply(p);
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gallery.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let ddx = g.x as f64 - x;
            let ddy = g.y as f64 - y;
            let d2 = ddx * ddx + ddy * ddy;
            if d2 > r2 || signed_delta(angle, g.angle as f64).abs() > params.pair_angle {
                continue;
            }
            if best.map_or(true, |(_, bd)| d2 < bd) {
                best = Some((gi, d2));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            paired += if params.quality_weighting {
                (p.quality as f64 * gallery[gi].quality as f64).sqrt() / 100.0
            } else {
                1.0
            };
        }
    }
    paired
}
