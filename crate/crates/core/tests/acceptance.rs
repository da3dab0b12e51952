//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs with `cargo test -p dyadic-lab --test acceptance`.

use dyadic_lab::battery::Stage;
use dyadic_lab::calibration::{default_path, Calibration};
use dyadic_lab::entropy::{conditional_entropy, shannon_entropy, shifted_partition_entropy};
use dyadic_lab::experiment::{
    check_continuity, check_corollary, check_local_global, experiment_katz_tao,
    experiment_theorem11, GeneratorSpec, Verdict, VerdictRecord,
};
use dyadic_lab::geometry::conical::{conical_scan, well_surrounded};
use dyadic_lab::geometry::distance::{pinned_scan, PinPolicy};
use dyadic_lab::regular::{
    generate_katz_tao, generate_pattern_set, generate_random_regular, measure_to_set,
    regularity_constant, set_to_measure, Exponent, PatternSpec, RandomRegularSpec,
};
use dyadic_lab::{DyadicMeasure, GridSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn verdicts_pass(records: &[VerdictRecord]) -> Outcome {
    let ok = records.iter().all(|r| r.verdict == Verdict::Pass);
    let detail = records
        .iter()
        .map(|r| format!("{} {:?}: {}", r.criterion, r.verdict, r.detail))
        .collect::<Vec<_>>()
        .join(" | ");
    (ok, detail)
}

fn calibration() -> (Calibration, String) {
    Calibration::load(&default_path()).expect("committed constants file")
}

fn katz_tao_scaling() -> Outcome {
    let start = Instant::now();
    let report = experiment_katz_tao(&[4, 6, 8, 10, 12]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (ok, detail) = verdicts_pass(&report.verdicts);
    (
        ok && report.verdicts.len() == 2 && secs <= 120.0,
        format!("{detail} | max counts {} | {secs:.1}s", report.measured["max_counts"]),
    )
}

fn regular_sets_have_few_exceptions() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    let r = experiment_theorem11(&GeneratorSpec::ThreeQuadrant, &[6, 8, 9], 0.85, PinPolicy::Auto { seed: 1 }, 0.0)
        .unwrap();
    let fr: Vec<f64> = r.measured["scales"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row["exceptional_fraction"].as_f64().unwrap())
        .collect();
    ok &= fr.iter().all(|&f| f == 0.0);
    notes.push(format!("three-quadrant t=0.85 fractions {fr:?}"));
    for s in [1.2, 1.4, 1.6] {
        for seed in [1, 2, 3] {
            let gen = GeneratorSpec::Random { s, c_target: 4.0, seed };
            let r = experiment_theorem11(&gen, &[8, 9, 10], 0.8, PinPolicy::Auto { seed }, 0.01).unwrap();
            let fr: Vec<f64> = r.measured["scales"]
                .as_array()
                .unwrap()
                .iter()
                .map(|row| row["exceptional_fraction"].as_f64().unwrap())
                .collect();
            let good = fr[2] < 0.01 && fr.windows(2).all(|w| w[1] <= w[0]);
            ok &= good;
            if !good || fr.iter().any(|&f| f > 0.0) {
                notes.push(format!("s={s} seed={seed} fractions {fr:?}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    notes.push(format!("9 random sets at t=0.8, {secs:.1}s"));
    (ok && secs <= 600.0, notes.join("; "))
}

fn katz_tao_contrast() -> Outcome {
    let a = generate_katz_tao(8).unwrap();
    let scan = pinned_scan(&a, 0.6, PinPolicy::All).unwrap();
    let cone = conical_scan(&a, (-5f64).exp2(), 0.125, PinPolicy::All).unwrap();
    let ok = scan.exceptional_fraction == 1.0 && cone.well_surrounded_fraction < 0.05;
    (
        ok,
        format!(
            "exceptional fraction {} ({} of {}, target 1.0); well-surrounded fraction {}",
            scan.exceptional_fraction, scan.exceptional, scan.pins_scanned, cone.well_surrounded_fraction
        ),
    )
}

fn random_measure(rng: &mut ChaCha8Rng) -> DyadicMeasure {
    let dim = rng.gen_range(1..=2);
    let depth = rng.gen_range(1..=if dim == 1 { 10 } else { 6 });
    let cells = 1u64 << (dim as u32 * depth);
    let n = rng.gen_range(1..=cells.min(300));
    let weights: Vec<(u64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0..cells), rng.gen_range(0.0..1.0f64).powi(3)))
        .collect::<std::collections::BTreeMap<_, _>>()
        .into_iter()
        .collect();
    DyadicMeasure::from_weights(dim, depth, weights.clone())
        .unwrap_or_else(|_| DyadicMeasure::from_weights(dim, depth, vec![(weights[0].0, 1.0)]).unwrap())
}

/// `λ μ + (1 - λ) ν` on a common grid.
fn mix(mu: &DyadicMeasure, nu: &DyadicMeasure, lambda: f64) -> DyadicMeasure {
    let mut cells = std::collections::BTreeMap::new();
    for &(c, m) in mu.cells() {
        *cells.entry(c).or_insert(0.0) += lambda * m;
    }
    for &(c, m) in nu.cells() {
        *cells.entry(c).or_insert(0.0) += (1.0 - lambda) * m;
    }
    DyadicMeasure::from_weights(mu.dim(), mu.depth(), cells).unwrap()
}

fn entropy_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut chain_err, mut concave_err, mut bound_err, mut shift_excess) = (0.0f64, 0.0f64, 0.0f64, f64::MIN);
    for _ in 0..1000 {
        let mu = random_measure(&mut rng);
        let n = mu.depth();
        let d = mu.dim() as f64;
        for fine in 0..=n {
            let hf = shannon_entropy(&mu, fine).unwrap().bits;
            let support = mu.aggregate(fine).unwrap().len() as f64;
            bound_err = bound_err.max(hf - support.log2()).max(hf - d * fine as f64);
            for coarse in 0..=fine {
                let hc = shannon_entropy(&mu, coarse).unwrap().bits;
                let cond = conditional_entropy(&mu, fine, coarse).unwrap().bits;
                chain_err = chain_err.max((hf - hc - cond).abs());
            }
            let width = 1u64 << (n - fine);
            let offset = [rng.gen_range(0..width), if mu.dim() == 2 { rng.gen_range(0..width) } else { 0 }];
            let hs = shifted_partition_entropy(&mu, fine, offset).unwrap();
            shift_excess = shift_excess.max((hs - hf).abs() - d * 3f64.log2());
        }
        // concavity against a second measure on the same grid
        let mut nu = random_measure(&mut rng);
        while nu.dim() != mu.dim() || nu.depth() != mu.depth() {
            nu = random_measure(&mut rng);
        }
        let lambda: f64 = rng.gen_range(0.0..1.0);
        let mixed = mix(&mu, &nu, lambda);
        for k in 0..=n {
            let h = |m: &DyadicMeasure| shannon_entropy(m, k).unwrap().bits;
            concave_err = concave_err.max(lambda * h(&mu) + (1.0 - lambda) * h(&nu) - h(&mixed));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = chain_err <= 1e-9 && concave_err <= 1e-9 && bound_err <= 1e-9 && shift_excess <= 0.0 && secs <= 60.0;
    (
        ok,
        format!(
            "1000 measures: chain rule err {chain_err:.2e}, concavity excess {concave_err:.2e}, \
             log bound excess {bound_err:.2e}, shifted-grid excess over d log2 3 {shift_excess:.3}, {secs:.1}s"
        ),
    )
}

fn local_global() -> Outcome {
    let (cal, _) = calibration();
    verdicts_pass(&check_local_global(&cal, Stage::Acceptance).unwrap())
}

fn distance_entropy_bound() -> Outcome {
    let (cal, _) = calibration();
    verdicts_pass(&[check_corollary(&cal, Stage::Acceptance).unwrap()])
}

fn direction_continuity() -> Outcome {
    let (cal, _) = calibration();
    verdicts_pass(&[check_continuity(&cal, Stage::Acceptance).unwrap()])
}

/// Counts and constant by direct pairwise distance checks.
fn naive_regularity(set: &GridSet, s: f64) -> (f64, Vec<(u64, u64)>) {
    let n = set.scale();
    let mut c_star = 0.0f64;
    let mut extremes = Vec::new();
    for k in 0..n {
        let r = 1u64 << (n - k);
        let counts: Vec<u64> = set
            .points()
            .iter()
            .map(|x| {
                set.points()
                    .iter()
                    .filter(|y| {
                        let dx = x[0].abs_diff(y[0]);
                        let dy = x[1].abs_diff(y[1]);
                        dx * dx + dy * dy <= r * r
                    })
                    .count() as u64
            })
            .collect();
        let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        let expected = ((n - k) as f64 * s).exp2();
        c_star = c_star.max((hi as f64 / expected).max(expected / lo as f64));
        extremes.push((lo, hi));
    }
    (c_star, extremes)
}

fn random_grid_set(rng: &mut ChaCha8Rng, max_points: usize) -> GridSet {
    let dim = rng.gen_range(1..=2);
    let scale = rng.gen_range(2..=if dim == 1 { 10 } else { 7 });
    let side = 1u64 << scale;
    let cells = if dim == 1 { side } else { side * side };
    let n = rng.gen_range(1..=(cells as usize).min(max_points));
    let mut pts: Vec<[u64; 2]> = (0..n)
        .map(|_| [rng.gen_range(0..side), if dim == 2 { rng.gen_range(0..side) } else { 0 }])
        .collect();
    pts.sort_unstable();
    pts.dedup();
    GridSet::new(dim, scale, pts).unwrap()
}

fn regularity_oracle() -> Outcome {
    let mut instances: Vec<(String, GridSet, f64)> = vec![
        ("three-quadrant".into(), generate_pattern_set(&PatternSpec::three_quadrant(6)).unwrap(), 3f64.log2()),
        ("full".into(), generate_pattern_set(&PatternSpec::full(2, 4)).unwrap(), 2.0),
        ("cantor".into(), generate_pattern_set(&PatternSpec::middle_half_cantor(5)).unwrap(), 0.5),
        ("katz-tao".into(), generate_katz_tao(8).unwrap(), 1.0),
    ];
    for (dim, scale, s) in [(1, 10, 0.6), (2, 8, 1.2), (2, 7, 1.4)] {
        let set = generate_random_regular(&RandomRegularSpec { dim, scale, s, c_target: 4.0, seed: 9 }).unwrap();
        instances.push((format!("random d{dim} s{s}"), set, s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..50 {
        let set = random_grid_set(&mut rng, 1000);
        let s = rng.gen_range(0.1..set.dim() as f64);
        instances.push((format!("random subset {i}"), set, s));
    }
    let mut mismatches = Vec::new();
    for (name, set, s) in &instances {
        assert!(set.len() <= 1000, "{name}");
        let fast = regularity_constant(set, Exponent::Fixed(*s)).unwrap();
        let (c_star, extremes) = naive_regularity(set, *s);
        let fast_ext: Vec<(u64, u64)> = fast.per_k.iter().map(|r| (r.min_count, r.max_count)).collect();
        if fast.c_star != c_star || fast_ext != extremes {
            mismatches.push(name.clone());
        }
    }
    let mut roundtrip_bad = 0;
    for _ in 0..100 {
        let set = random_grid_set(&mut rng, 2000);
        if measure_to_set(&set_to_measure(&set)).unwrap() != set {
            roundtrip_bad += 1;
        }
    }
    (
        mismatches.is_empty() && roundtrip_bad == 0,
        format!(
            "{} instances, mismatches {mismatches:?}; 100 roundtrips, {roundtrip_bad} failed",
            instances.len()
        ),
    )
}

/// For every direction on a `2^-12` grid of `[0, π)`, some `y` with
/// `|x - y| >= r_min` lies in the two-sided cone of half-angle `β`.
fn surrounded_on_grid(x: [u64; 2], set: &GridSet, beta: f64, r_min: f64) -> bool {
    let unit = (-(set.scale() as f64)).exp2();
    let angles: Vec<f64> = set
        .points()
        .iter()
        .filter_map(|y| {
            let dx = (y[0] as f64 - x[0] as f64) * unit;
            let dy = (y[1] as f64 - x[1] as f64) * unit;
            let r = (dx * dx + dy * dy).sqrt();
            (y != &x && r >= r_min).then(|| dy.atan2(dx))
        })
        .collect();
    let step = (-12f64).exp2();
    let steps = (PI / step).ceil() as usize;
    (0..steps).all(|j| {
        let v = j as f64 * step;
        angles.iter().any(|&a| {
            let d = (a - v).rem_euclid(PI);
            d.min(PI - d) < beta
        })
    })
}

fn well_surrounded_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut disagreements = Vec::new();
    let mut positives = 0;
    for i in 0..100 {
        let scale = rng.gen_range(3..=7);
        let side = 1u64 << scale;
        let n = rng.gen_range(2..=1000usize.min((side * side) as usize));
        let mut pts: Vec<[u64; 2]> = (0..n).map(|_| [rng.gen_range(0..side), rng.gen_range(0..side)]).collect();
        pts.sort_unstable();
        pts.dedup();
        let set = GridSet::new(2, scale, pts).unwrap();
        let x = set.points()[rng.gen_range(0..set.len())];
        let beta = rng.gen_range(0.02..1.5);
        let r_min = rng.gen_range(0.01..0.5);
        let fast = well_surrounded(x, &set, beta, r_min).unwrap();
        positives += fast as usize;
        if fast != surrounded_on_grid(x, &set, beta, r_min) {
            disagreements.push(i);
        }
    }
    (
        disagreements.is_empty(),
        format!("100 instances ({positives} surrounded), disagreements {disagreements:?}"),
    )
}

fn main() {
    // honour `cargo test -- --list` and filters without running the suite twice
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 9] = [
        ("Katz-Tao scaling law", katz_tao_scaling),
        ("regular sets: exceptional pins", regular_sets_have_few_exceptions),
        ("s = 1 contrast", katz_tao_contrast),
        ("entropy identities", entropy_identities),
        ("local-global lemma", local_global),
        ("distance-entropy lower bound", distance_entropy_bound),
        ("direction continuity", direction_continuity),
        ("regularity verifier vs oracle", regularity_oracle),
        ("well-surroundedness equivalence", well_surrounded_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += !ok as usize;
        println!(
            "criterion {}: {} {name} ({:.1}s): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
