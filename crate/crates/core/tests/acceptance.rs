//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release --test acceptance`. The process exits
//! nonzero only when `ABIG_ACCEPTANCE_STRICT=1` is set and a criterion fails;
//! by default the verdicts are reported and the run succeeds so that known
//! failures stay visible without hiding the rest of the workspace results.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use abig::autodiff::Matrix;
use abig::features::{patch_feature_values, FeatureParams, BLOCK_WIDTHS, N_FEATURES};
use abig::geometry::{delaunay_triangulate, euclidean_mst, voronoi_partition, ClipRect, Point2D};
use abig::io::{dataset_from_synth, Checkpoint};
use abig::model::{gumbel_noise, gumbel_sigmoid, ArchConfig, ClassifierParams, GeneratorParams, ParamList};
use abig::parallel::Exec;
use abig::synth::{default_spec, generate_dataset, long_range_spec, DatasetSpec};
use abig::train::gradcheck::{run_suite, TOLERANCE};
use abig::train::{
    cross_validate, fixed_graph_baseline, single_split, train, train_single_split, Dataset, IterationRecord, TrainConfig,
};
use common::oracles::{brute_features, empty_circle_margin, kruskal_weights, random_patch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const EXEC: Exec = Exec::Parallel;
const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Runs a criterion and folds its wall-clock limit into the verdict.
fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let t = Instant::now();
    let mut v = f();
    let elapsed = t.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            v.pass = false;
            v.detail.push_str(&format!("; over the {:.0} s limit", limit.as_secs_f64()));
        }
    }
    (v, elapsed)
}

fn names(spec: &DatasetSpec) -> Vec<String> {
    spec.classes.iter().map(|c| c.name.clone()).collect()
}

fn build_dataset(spec: &DatasetSpec) -> Dataset {
    let images = generate_dataset(spec, EXEC).expect("valid spec");
    dataset_from_synth(&images, names(spec), FeatureParams::default(), EXEC).expect("features")
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Point2D> {
    (0..n).map(|_| Point2D::new(rng.random_range(0.5..side - 0.5), rng.random_range(0.5..side - 0.5))).collect()
}

fn geometry_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut mst_ok = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let pts = random_points(&mut rng, n, 100.0);
        let ours = euclidean_mst(&pts).unwrap().total_weight();
        let oracle: f64 = kruskal_weights(&pts).iter().sum();
        mst_ok += usize::from(ours == oracle);
    }
    let mut worst_margin = f64::INFINITY;
    let mut triangles = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..=30);
        let pts = random_points(&mut rng, n, 100.0);
        let t = delaunay_triangulate(&pts).unwrap();
        for &tri in &t.triangles {
            worst_margin = worst_margin.min(empty_circle_margin(&pts, tri));
            triangles += 1;
        }
    }
    let clip = ClipRect::new(0.0, 0.0, 100.0, 100.0).unwrap();
    let mut worst_area = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=30);
        let pts = random_points(&mut rng, n, 100.0);
        let vp = voronoi_partition(&pts, clip).unwrap();
        worst_area = worst_area.max((vp.total_area() - clip.area()).abs() / clip.area());
    }
    let pass = mst_ok == 100 && worst_margin > -1e-9 && worst_area <= 1e-6;
    verdict(
        pass,
        format!(
            "MST exact {mst_ok}/100; {triangles} triangles, worst circumcircle margin {worst_margin:.3e}; worst Voronoi area error {worst_area:.1e}"
        ),
    )
}

fn feature_bank() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    let mut lengths_ok = true;
    for _ in 0..25 {
        let clip = ClipRect::new(100.0, 50.0, 228.0, 178.0).unwrap();
        let n = rng.random_range(12..=45);
        let cells = random_patch(&mut rng, n, clip);
        let params = FeatureParams { d_p: rng.random_range(15.0..45.0), theta_sim: 0.8 };
        let ours = patch_feature_values(&cells, params, clip).unwrap();
        let oracle = brute_features(&cells, params.d_p, params.theta_sim, clip);
        lengths_ok &= ours.len() == 69;
        for (a, b) in ours.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    let layout = BLOCK_WIDTHS == [18, 13, 8, 4, 26] && N_FEATURES == 69;
    verdict(lengths_ok && layout && worst <= 1e-8, format!("25 patches x 69 features, worst abs error {worst:.2e}; widths {BLOCK_WIDTHS:?}"))
}

fn gradient_suite() -> Verdict {
    let results = run_suite(None);
    let worst = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let pipeline = ["pipeline_theta_n4", "pipeline_psi_n5", "pipeline_both_n6"]
        .iter()
        .all(|n| results.iter().any(|r| r.name == *n && r.passed));
    verdict(
        failed.is_empty() && pipeline && worst < TOLERANCE,
        format!("{} checks, worst relative error {worst:.2e}, failed {failed:?}", results.len()),
    )
}

fn adjacency_invariants(histories: &[Vec<IterationRecord>]) -> Verdict {
    let violations: usize = histories.iter().flatten().map(|r| r.adjacency_violations).sum();
    let sampled: usize = histories.iter().flatten().map(|r| r.samples).sum();
    let tau_ok = histories.iter().all(|h| {
        h.windows(2).all(|w| w[1].tau <= w[0].tau) && h.iter().all(|r| r.tau >= 0.1) && h.last().is_some_and(|r| r.tau == 0.1)
    });

    let normal = Normal::new(0.0, 3.0).unwrap();
    let mut fractions = Vec::new();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let logits = Matrix::from_fn(64, 64, |_, _| normal.sample(&mut rng));
        let noise = gumbel_noise(64, 64, &mut rng);
        let a = gumbel_sigmoid(&logits, 0.1, Some(&noise)).unwrap();
        let near = a.data().iter().filter(|&&v| v.min(1.0 - v) <= 0.05).count();
        fractions.push(near as f64 / a.len() as f64);
    }
    let overall = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let lowest = fractions.iter().copied().fold(1.0, f64::min);
    let saturated = overall >= 0.95;
    verdict(
        violations == 0 && sampled > 0 && tau_ok && saturated,
        format!(
            "{sampled} sampled adjacencies, {violations} violations; tau nonincreasing to 0.1: {tau_ok}; \
             saturation at tau 0.1 {:.2}% (lowest seed {:.2}%, target 95%)",
            100.0 * overall,
            100.0 * lowest
        ),
    )
}

fn sparsity_response(ds: &Dataset, histories: &mut Vec<Vec<IterationRecord>>) -> Verdict {
    let lambdas = [0.0, 1e-4, 1e-2];
    let mut means = Vec::new();
    let mut per_seed = Vec::new();
    for &lambda in &lambdas {
        let mut finals = Vec::new();
        for seed in SEEDS {
            let config = TrainConfig { lambda_sparse: lambda, seed, ..TrainConfig::default() };
            let split = single_split(&ds.labels(), 1.0 / 3.0, seed).unwrap();
            let state = train(ds, &split, &config, EXEC).unwrap();
            finals.push(state.history.last().unwrap().mean_offdiag);
            histories.push(state.history);
        }
        means.push(finals.iter().sum::<f64>() / finals.len() as f64);
        per_seed.push(finals);
    }
    let pass = means.windows(2).all(|w| w[1] <= w[0]);
    let body: Vec<String> = lambdas
        .iter()
        .zip(&means)
        .zip(&per_seed)
        .map(|((l, m), s)| format!("lambda {l:e}: {m:.4} ({})", s.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("/")))
        .collect();
    verdict(pass, format!("final mean off-diagonal mass {}", body.join(", ")))
}

/// Means of consecutive blocks of `w` iterations.
fn block_means(values: &[f64], w: usize) -> Vec<f64> {
    values.chunks_exact(w).map(|c| c.iter().sum::<f64>() / w as f64).collect()
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn end_to_end(ds: &Dataset, histories: &mut Vec<Vec<IterationRecord>>) -> Verdict {
    let config = TrainConfig::default();
    let report = cross_validate(ds, 3, &config, EXEC).unwrap();
    let mut curves_ok = true;
    let mut final_lower = Vec::new();
    for f in &report.folds {
        let lower: Vec<f64> = f.history.iter().map(|r| r.lower_loss).collect();
        let upper: Vec<f64> = f.history.iter().map(|r| r.upper_loss.unwrap()).collect();
        curves_ok &= nonincreasing(&block_means(&lower, 20)) && nonincreasing(&block_means(&upper, 20));
        final_lower.push(*lower.last().unwrap());
        histories.push(f.history.clone());
    }
    let acc = 100.0 * report.accuracy_mean;
    let sd = 100.0 * report.accuracy_sd;
    let lower_ok = final_lower.iter().all(|&l| l < 0.1);
    let folds: Vec<String> = report.folds.iter().map(|f| format!("{:.1}", 100.0 * f.metrics.accuracy)).collect();
    verdict(
        acc >= 90.0 && sd <= 5.0 && curves_ok && lower_ok,
        format!(
            "accuracy {acc:.2} ± {sd:.2} (folds {}), macro-F1 {:.2}; 20-iteration loss means nonincreasing: {curves_ok}; \
             final lower loss {}",
            folds.join("/"),
            100.0 * report.macro_f1_mean,
            final_lower.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("/")
        ),
    )
}

fn ablation(ds: &Dataset, histories: &mut Vec<Vec<IterationRecord>>) -> Verdict {
    let mut gaps = Vec::new();
    let mut rows = Vec::new();
    for seed in SEEDS {
        let config = TrainConfig { seed, ..TrainConfig::default() };
        let (state, _, learned) = train_single_split(ds, &config, EXEC).unwrap();
        histories.push(state.history);
        let (_, _, fixed) = fixed_graph_baseline(ds, &config, 0.8, EXEC).unwrap();
        let (a, b) = (100.0 * learned.metrics.accuracy, 100.0 * fixed.metrics.accuracy);
        gaps.push(a - b);
        rows.push(format!("seed {seed}: {a:.1} vs {b:.1}"));
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    verdict(mean_gap >= 5.0, format!("learned vs fixed-0.8 {}; mean paired gap {mean_gap:+.1} points", rows.join(", ")))
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_abig"))
        .args(args)
        .current_dir(dir)
        .env_remove("ABIG_SEED")
        .output()
        .is_ok_and(|o| o.status.success())
}

/// synth, extract, train (single split) and eval in `dir`; returns the
/// produced files.
fn cli_pipeline(dir: &Path, extra: &[&str]) -> Option<Vec<(String, Vec<u8>)>> {
    let spec = DatasetSpec { images_per_class: 3, grid_rows: 2, grid_cols: 2, ..default_spec() };
    std::fs::write(dir.join("spec.json"), serde_json::to_string(&spec).ok()?).ok()?;
    let arch = ArchConfig { gcn_dims: vec![16, 16], head_dims: vec![16], generator_dims: vec![16], ..ArchConfig::default() };
    let cfg = TrainConfig { arch, epochs: 4, batch_size: 3, ..TrainConfig::default() };
    std::fs::write(dir.join("config.json"), serde_json::to_string(&cfg).ok()?).ok()?;
    let steps: [&[&str]; 4] = [
        &["synth", "--spec", "spec.json", "--out", "data"],
        &["extract", "--manifest", "data/manifest.json", "--out", "features.csv"],
        &["train", "--features", "features.csv", "--manifest", "data/manifest.json", "--config", "config.json", "--out", "run"],
        &["eval", "--checkpoint", "run/checkpoint.bin", "--features", "features.csv", "--manifest", "data/manifest.json", "--out", "eval.json"],
    ];
    for step in steps {
        let mut args = step.to_vec();
        args.extend_from_slice(extra);
        if !run_cli(dir, &args) {
            return None;
        }
    }
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).ok()? {
            let p = entry.ok()?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).ok()?.display().to_string(), std::fs::read(&p).ok()?));
            }
        }
    }
    files.sort();
    Some(files)
}

fn determinism() -> Verdict {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = cli_pipeline(dirs[0].path(), &[]);
    let b = cli_pipeline(dirs[1].path(), &[]);
    let c = cli_pipeline(dirs[2].path(), &["--sequential"]);
    let (cli_ok, files) = match (&a, &b, &c) {
        (Some(a), Some(b), Some(c)) => (a == b && a == c, a.len()),
        _ => (false, 0),
    };

    let spec = DatasetSpec { images_per_class: 4, ..default_spec() };
    let ds = build_dataset(&spec);
    let arch = ArchConfig { gcn_dims: vec![16, 16], head_dims: vec![16], generator_dims: vec![16], ..ArchConfig::default() };
    let config = TrainConfig { arch, epochs: 5, batch_size: 4, ..TrainConfig::default() };
    let split = single_split(&ds.labels(), 0.25, 3).unwrap();
    let state = train(&ds, &split, &config, EXEC).unwrap();
    let ckpt = Checkpoint { config: config.clone(), class_names: ds.class_names.clone(), split: Some(split), state };
    let path = dirs[0].path().join("round_trip.bin");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let bits = |c: &Checkpoint| -> Vec<u64> {
        let mut v: Vec<u64> = Vec::new();
        for t in c.state.theta.tensors().into_iter().chain(c.state.psi.tensors()) {
            v.extend(t.data().iter().map(|x| x.to_bits()));
        }
        v
    };
    let round_trip = back == ckpt && bits(&back) == bits(&ckpt) && back.to_bytes() == std::fs::read(&path).unwrap();
    verdict(
        cli_ok && round_trip,
        format!("CLI pipeline reruns byte-identical ({files} files, thread pool and sequential): {cli_ok}; checkpoint round-trip bitwise: {round_trip}"),
    )
}

fn parameter_counts() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let counted = |arch: &ArchConfig, rng: &mut ChaCha8Rng| -> usize {
        let theta = ClassifierParams::init(arch, rng);
        let psi = GeneratorParams::init(arch, rng);
        theta.tensors().iter().chain(psi.tensors().iter()).map(|t| t.len()).sum()
    };
    let default = ArchConfig::default();
    let large = ArchConfig::large();
    let (d, l) = (counted(&default, &mut rng), counted(&large, &mut rng));
    let consistent = d == default.total_param_count() && l == large.total_param_count();
    let rel = (l as f64 - 860_000.0) / 860_000.0;
    println!("trainable parameters: default {d}, large preset {l}");
    verdict(consistent && rel.abs() <= 0.05, format!("default {d}; large preset {l} ({:+.2}% from 0.86M)", 100.0 * rel))
}

fn main() {
    // the libtest harness passes flags such as --list; there is nothing to list
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Verdict, Duration)> = Vec::new();
    let mut report = |id: u32, name: &'static str, (v, t): (Verdict, Duration)| {
        eprintln!("  [{:>7.1} s] criterion {id} done", start.elapsed().as_secs_f64());
        results.push((id, name, v, t));
    };

    report(1, "geometry oracles", timed(Some(Duration::from_secs(10)), geometry_oracles));
    report(2, "feature bank", timed(Some(Duration::from_secs(30)), feature_bank));
    report(3, "gradient suite", timed(Some(Duration::from_secs(60)), gradient_suite));

    let default_ds = build_dataset(&default_spec());
    let mut histories = Vec::new();
    let c5 = timed(Some(Duration::from_secs(20 * 60)), || sparsity_response(&default_ds, &mut histories));
    let c6 = timed(Some(Duration::from_secs(30 * 60)), || end_to_end(&default_ds, &mut histories));
    let long_ds = build_dataset(&long_range_spec());
    let c7 = timed(None, || ablation(&long_ds, &mut histories));
    report(4, "adjacency invariants", timed(None, || adjacency_invariants(&histories)));
    report(5, "sparsity response", c5);
    report(6, "end-to-end classification", c6);
    report(7, "learned vs fixed graph", c7);
    report(8, "determinism", timed(None, determinism));
    report(9, "parameter counts", timed(None, parameter_counts));

    results.sort_by_key(|r| r.0);
    println!();
    let mut failed = 0;
    for (id, name, v, t) in &results {
        failed += usize::from(!v.pass);
        println!("criterion {id} {name}: {} [{:.1} s] {}", if v.pass { "PASS" } else { "FAIL" }, t.as_secs_f64(), v.detail);
    }
    println!("\n{} of {} criteria passed in {:.0} s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 && std::env::var("ABIG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
