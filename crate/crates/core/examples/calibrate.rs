//! Monte-Carlo score distributions of the built-in matcher on synthetic data.
//!
//! `cargo run --release -p fpeval-core --example calibrate`

use fpeval_core::matcher::compare_templates;
use fpeval_core::testkit::{derive_seed, synth_impression, synth_template, SynthParams};
use fpeval_core::BuiltinParams;

fn quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

fn main() {
    let p = SynthParams::default();
    let bp = BuiltinParams::default();
    let trials = 200u64;
    let mut base_vs_imp = Vec::new();
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for s in 0..trials {
        let fs = derive_seed(&[77, s]);
        let base = synth_template(&p, fs).unwrap();
        let i1 = synth_impression(&base, &p, derive_seed(&[fs, 1]));
        let i2 = synth_impression(&base, &p, derive_seed(&[fs, 2]));
        base_vs_imp.push(compare_templates(&bp, &base, &i1).value());
        genuine.push(compare_templates(&bp, &i1, &i2).value());
        let other = synth_template(&p, derive_seed(&[78, s])).unwrap();
        let o1 = synth_impression(&other, &p, derive_seed(&[s, 9]));
        impostor.push(compare_templates(&bp, &i1, &o1).value());
    }
    if std::env::args().any(|a| a == "--timing") {
        let a = synth_template(&p, 1).unwrap();
        let b = synth_template(&p, 2).unwrap();
        let start = std::time::Instant::now();
        let mut acc = 0.0;
        for _ in 0..std::env::var("ITER").ok().and_then(|v| v.parse().ok()).unwrap_or(10_000) {
            acc += compare_templates(&bp, &a, &b).value();
        }
        println!("{} minutiae vs {}: {:?} per comparison ({acc})", a.len(), b.len(), start.elapsed() / 10_000);
        return;
    }
    dedup_calibration(&p, &bp);
    let ge60 = base_vs_imp.iter().filter(|&&s| s >= 60.0).count();
    println!("base vs impression: >=60 in {ge60}/{trials}; q05 {:.2} median {:.2}", quantile(&mut base_vs_imp, 0.05), quantile(&mut base_vs_imp, 0.5));
    println!("genuine impression pairs: q05 {:.2} median {:.2}", quantile(&mut genuine, 0.05), quantile(&mut genuine, 0.5));
    println!(
        "impostor: median {:.2} q95 {:.2} q99 {:.2} max {:.2}",
        quantile(&mut impostor, 0.5),
        quantile(&mut impostor, 0.95),
        quantile(&mut impostor, 0.99),
        quantile(&mut impostor, 1.0)
    );
}

/// Best cross-impression score of a planted duplicate (same finger seed, two
/// databases with different impression noise) against the genuine 99.9th
/// percentile and the impostor maximum of one 50 x 8 database.
fn dedup_calibration(p: &SynthParams, bp: &BuiltinParams) {
    use fpeval_core::metrics::percentile;
    use fpeval_core::testkit::synth_database_with_fingers;
    use fpeval_core::Score;
    let seeds_a = (0..50u64).map(|i| derive_seed(&[1, i])).collect::<Vec<_>>();
    let mut seeds_b = (0..50u64).map(|i| derive_seed(&[2, i])).collect::<Vec<_>>();
    seeds_b[..20].copy_from_slice(&seeds_a[..20]);
    let a = synth_database_with_fingers(&SynthParams { seed: 11, ..p.clone() }, "A", &seeds_a, 8).unwrap();
    let b = synth_database_with_fingers(&SynthParams { seed: 12, ..p.clone() }, "B", &seeds_b, 8).unwrap();
    let mut genuine = Vec::new();
    for i in 1..=50 {
        for j in 1..=8 {
            for y in j + 1..=8 {
                genuine.push(Score::new(compare_templates(bp, &a.get(i, j).unwrap().template, &a.get(i, y).unwrap().template).value()).unwrap());
            }
        }
    }
    let q999 = percentile(&genuine, 99.9).unwrap();
    let mut dup_best = Vec::new();
    let mut cross_max: f64 = 0.0;
    for i in 1..=50 {
        for x in 1..=50 {
            let mut best: f64 = 0.0;
            for j in 1..=8 {
                for y in 1..=8 {
                    let s = compare_templates(bp, &a.get(i, j).unwrap().template, &b.get(x, y).unwrap().template).value();
                    best = best.max(s);
                }
            }
            if i == x && i <= 20 {
                dup_best.push(best);
            } else {
                cross_max = cross_max.max(best);
            }
        }
    }
    dup_best.sort_by(f64::total_cmp);
    println!("genuine q99.9 {q999}; planted duplicate best min {:.2} median {:.2}; unrelated cross-db max {cross_max:.2}", dup_best[0], dup_best[dup_best.len() / 2]);
}
