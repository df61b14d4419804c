//! `abig` subcommands. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | gradient check failed, or an I/O error not covered below |
//! | 2 | `synth`: invalid dataset spec |
//! | 3 | `extract`: malformed manifest or cell-record file |
//! | 4 | `train`: invalid configuration |
//! | 5 | `eval`/`export-graph`: unsupported or corrupt checkpoint |
//! | 6 | `export-graph`: unknown image ID |

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::autodiff::OpKind;
use crate::features::FeatureParams;
use crate::io::{
    dataset_from_features, extract_features, read_features_csv, write_dataset, write_features_csv, Checkpoint, IoError,
    Manifest,
};
use crate::model::AdjacencyMode;
use crate::parallel::Exec;
use crate::synth::{generate_dataset, DatasetSpec};
use crate::train::{
    cross_validate, evaluate, gradcheck, inference_adjacency, single_split, train, Dataset, GraphMode, IterationRecord,
    TrainConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_CELLS: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_CHECKPOINT: i32 = 5;
pub const EXIT_UNKNOWN_IMAGE: i32 = 6;

/// Environment variable overriding the seed of `synth` and `train`.
pub const SEED_ENV: &str = "ABIG_SEED";

#[derive(Debug, Parser)]
#[command(name = "abig", version, about = "Patch-graph features and bilevel graph learning")]
pub struct Cli {
    /// Process items one at a time instead of on the thread pool.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Learned adjacency (default).
    Learned,
    /// Fixed cosine-threshold graph.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (manifest plus cell CSVs).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the 69-feature table for every patch in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64.0)]
        d_p: f64,
        #[arg(long, default_value_t = 0.8)]
        theta_sim: f64,
    },
    /// Train on a feature table; writes checkpoint, metrics.json and losses.csv.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// JSON training configuration; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Image-level cross-validation folds; without it a single split is used.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, value_enum, default_value_t = Baseline::Learned)]
        baseline: Baseline,
        #[arg(long, default_value_t = 0.8)]
        cos_threshold: f64,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalSplit::Test)]
        split: EvalSplit,
        #[arg(long, default_value = "soft")]
        adjacency: AdjacencyMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export one image's learned patch graph as JSON.
    ExportGraph {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        image: String,
        #[arg(long, default_value_t = 0.0)]
        min_weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every gradient rule.
    Gradcheck {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

struct Failure {
    code: i32,
    msg: String,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> Failure {
    Failure { code, msg: msg.to_string() }
}

type CmdResult = Result<(), Failure>;

fn seed_override() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_ENV}={v} is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let result = match cli.command {
        Command::Synth { spec, out } => cmd_synth(&spec, &out, exec),
        Command::Extract { manifest, out, d_p, theta_sim } => cmd_extract(&manifest, &out, FeatureParams { d_p, theta_sim }, exec),
        Command::Train { features, manifest, config, out, folds, baseline, cos_threshold, epochs } => {
            cmd_train(&features, &manifest, config.as_deref(), &out, folds, baseline, cos_threshold, epochs, exec)
        }
        Command::Eval { checkpoint, features, manifest, split, adjacency, out } => {
            cmd_eval(&checkpoint, &features, &manifest, split, adjacency, &out, exec)
        }
        Command::ExportGraph { checkpoint, features, manifest, image, min_weight, out } => {
            cmd_export_graph(&checkpoint, &features, &manifest, &image, min_weight, &out)
        }
        Command::Gradcheck { inject_fault } => cmd_gradcheck(inject_fault.as_deref()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| fail(EXIT_FAILURE, e))?;
    std::fs::write(path, text + "\n").map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", path.display())))
}

fn cmd_synth(spec_path: &Path, out: &Path, exec: Exec) -> CmdResult {
    let text = std::fs::read_to_string(spec_path).map_err(|e| fail(EXIT_SPEC, format!("{}: {e}", spec_path.display())))?;
    let mut spec: DatasetSpec =
        serde_json::from_str(&text).map_err(|e| fail(EXIT_SPEC, format!("{}: {e}", spec_path.display())))?;
    if let Some(seed) = seed_override().map_err(|e| fail(EXIT_SPEC, e))? {
        spec.seed = seed;
    }
    let images = generate_dataset(&spec, exec).map_err(|e| fail(EXIT_SPEC, e))?;
    let manifest = write_dataset(out, &spec, &images).map_err(|e| fail(EXIT_FAILURE, e))?;
    println!("wrote {} images to {}", manifest.images.len(), out.display());
    Ok(())
}

fn manifest_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn cmd_extract(manifest_path: &Path, out: &Path, params: FeatureParams, exec: Exec) -> CmdResult {
    if !(params.d_p > 0.0) || !(-1.0..=1.0).contains(&params.theta_sim) {
        return Err(fail(EXIT_FAILURE, format!("invalid feature parameters {params:?}")));
    }
    let manifest = Manifest::read(manifest_path).map_err(|e| fail(EXIT_CELLS, e))?;
    let rows = extract_features(&manifest, &manifest_root(manifest_path), params, exec).map_err(|e| match e {
        IoError::Malformed { .. } | IoError::Invalid { .. } | IoError::Io { .. } => fail(EXIT_CELLS, e),
        other => fail(EXIT_FAILURE, other),
    })?;
    write_features_csv(out, &rows).map_err(|e| fail(EXIT_FAILURE, e))?;
    println!("wrote {} patch rows to {}", rows.len(), out.display());
    Ok(())
}

fn load_dataset(features: &Path, manifest: &Path, code: i32) -> Result<(Manifest, Dataset), Failure> {
    let m = Manifest::read(manifest).map_err(|e| fail(code, e))?;
    let rows = read_features_csv(features).map_err(|e| fail(code, e))?;
    let ds = dataset_from_features(&m, &rows, features).map_err(|e| fail(code, e))?;
    Ok((m, ds))
}

fn losses_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,lower_loss,upper_loss\n");
    for r in history {
        let upper = r.upper_loss.map(|u| format!("{u:.16e}")).unwrap_or_default();
        s.push_str(&format!("{},{:.16e},{}\n", r.iteration, r.lower_loss, upper));
    }
    s
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", path.display())))
}

/// Loads a training config, applies CLI overrides and validates.
pub fn resolve_config(
    config: Option<&Path>,
    baseline: Baseline,
    cos_threshold: f64,
    epochs: Option<usize>,
    classes: usize,
) -> Result<TrainConfig, String> {
    let mut cfg: TrainConfig = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    if config.is_none() {
        cfg.arch.classes = classes;
    }
    if baseline == Baseline::Fixed {
        cfg.graph = GraphMode::Fixed { threshold: cos_threshold };
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    if cfg.arch.classes != classes {
        return Err(format!("config has {} classes but the manifest has {classes}", cfg.arch.classes));
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    features: &Path,
    manifest: &Path,
    config: Option<&Path>,
    out: &Path,
    folds: Option<usize>,
    baseline: Baseline,
    cos_threshold: f64,
    epochs: Option<usize>,
    exec: Exec,
) -> CmdResult {
    let (_, ds) = load_dataset(features, manifest, EXIT_FAILURE)?;
    let cfg = resolve_config(config, baseline, cos_threshold, epochs, ds.class_names.len()).map_err(|e| fail(EXIT_CONFIG, e))?;
    std::fs::create_dir_all(out).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", out.display())))?;
    let params = json!({
        "classifier": cfg.arch.classifier_param_count(),
        "generator": cfg.arch.generator_param_count(),
        "total": cfg.arch.total_param_count(),
    });
    println!("trainable parameters: {} (classifier {}, generator {})", params["total"], params["classifier"], params["generator"]);

    match folds {
        Some(k) => {
            let report = cross_validate(&ds, k, &cfg, exec).map_err(|e| fail(EXIT_CONFIG, e))?;
            for f in &report.folds {
                write_text(&out.join(format!("losses_fold{}.csv", f.fold)), &losses_csv(&f.history))?;
                println!("fold {}: accuracy {:.4} macro-F1 {:.4}", f.fold, f.metrics.accuracy, f.metrics.macro_f1);
            }
            println!(
                "accuracy {:.2} ± {:.2}, macro-F1 {:.2} ± {:.2}",
                100.0 * report.accuracy_mean,
                100.0 * report.accuracy_sd,
                100.0 * report.macro_f1_mean,
                100.0 * report.macro_f1_sd
            );
            let folds_json: Vec<_> = report
                .folds
                .iter()
                .map(|f| json!({"fold": f.fold, "accuracy": f.metrics.accuracy, "macro_f1": f.metrics.macro_f1, "confusion": f.metrics.confusion, "test_images": f.split.test.iter().map(|&i| &ds.samples[i].image_id).collect::<Vec<_>>()}))
                .collect();
            write_json(
                &out.join("metrics.json"),
                &json!({
                    "config": cfg,
                    "parameters": params,
                    "mode": "cross_validation",
                    "folds": folds_json,
                    "accuracy_mean": report.accuracy_mean,
                    "accuracy_sd": report.accuracy_sd,
                    "macro_f1_mean": report.macro_f1_mean,
                    "macro_f1_sd": report.macro_f1_sd,
                }),
            )?;
            // the last fold's losses double as losses.csv
            if let Some(last) = report.folds.last() {
                write_text(&out.join("losses.csv"), &losses_csv(&last.history))?;
            }
        }
        None => {
            let split = single_split(&ds.labels(), 1.0 / 3.0, cfg.seed).map_err(|e| fail(EXIT_CONFIG, e))?;
            let state = train(&ds, &split, &cfg, exec).map_err(|e| fail(EXIT_CONFIG, e))?;
            let eval = evaluate(&state, &ds, &split.test, &cfg, cfg.adjacency, exec).map_err(|e| fail(EXIT_FAILURE, e))?;
            println!("test accuracy {:.4} macro-F1 {:.4}", eval.metrics.accuracy, eval.metrics.macro_f1);
            write_text(&out.join("losses.csv"), &losses_csv(&state.history))?;
            write_json(
                &out.join("metrics.json"),
                &json!({
                    "config": cfg,
                    "parameters": params,
                    "mode": "single_split",
                    "accuracy": eval.metrics.accuracy,
                    "macro_f1": eval.metrics.macro_f1,
                    "confusion": eval.metrics.confusion,
                }),
            )?;
            let ckpt = Checkpoint { config: cfg, class_names: ds.class_names.clone(), split: Some(split), state };
            ckpt.save(&out.join("checkpoint.bin")).map_err(|e| fail(EXIT_FAILURE, e))?;
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| match e {
        IoError::Io { .. } => fail(EXIT_FAILURE, e),
        other => fail(EXIT_CHECKPOINT, other),
    })
}

fn cmd_eval(
    checkpoint: &Path,
    features: &Path,
    manifest: &Path,
    split: EvalSplit,
    mode: AdjacencyMode,
    out: &Path,
    exec: Exec,
) -> CmdResult {
    let ckpt = load_checkpoint(checkpoint)?;
    let (_, ds) = load_dataset(features, manifest, EXIT_FAILURE)?;
    let indices: Vec<usize> = match (split, &ckpt.split) {
        (EvalSplit::All, _) => (0..ds.len()).collect(),
        (_, None) => return Err(fail(EXIT_FAILURE, "checkpoint records no split; use --split all")),
        (EvalSplit::Train, Some(s)) => s.train.clone(),
        (EvalSplit::Val, Some(s)) => s.val.clone(),
        (EvalSplit::Test, Some(s)) => s.test.clone(),
    };
    let eval = evaluate(&ckpt.state, &ds, &indices, &ckpt.config, mode, exec).map_err(|e| fail(EXIT_FAILURE, e))?;
    println!("accuracy {:.4} macro-F1 {:.4} on {} images", eval.metrics.accuracy, eval.metrics.macro_f1, indices.len());
    let predictions: Vec<_> = indices
        .iter()
        .zip(&eval.predictions)
        .map(|(&i, &p)| json!({"image_id": ds.samples[i].image_id, "label": ds.samples[i].label, "predicted": p}))
        .collect();
    write_json(
        out,
        &json!({
            "split": format!("{split:?}").to_lowercase(),
            "adjacency": mode,
            "accuracy": eval.metrics.accuracy,
            "macro_f1": eval.metrics.macro_f1,
            "confusion": eval.metrics.confusion,
            "predictions": predictions,
        }),
    )
}

fn cmd_export_graph(checkpoint: &Path, features: &Path, manifest: &Path, image: &str, min_weight: f64, out: &Path) -> CmdResult {
    let ckpt = load_checkpoint(checkpoint)?;
    let m = Manifest::read(manifest).map_err(|e| fail(EXIT_FAILURE, e))?;
    let entry = m.image(image).ok_or_else(|| fail(EXIT_UNKNOWN_IMAGE, format!("unknown image '{image}'")))?;
    let rows = read_features_csv(features).map_err(|e| fail(EXIT_FAILURE, e))?;
    let ds = dataset_from_features(&m, &rows, features).map_err(|e| fail(EXIT_FAILURE, e))?;
    let idx = ds.index_of(image).ok_or_else(|| fail(EXIT_UNKNOWN_IMAGE, format!("unknown image '{image}'")))?;
    let sample = &ds.samples[idx];
    let a = inference_adjacency(&ckpt.state, &sample.features, &ckpt.config, AdjacencyMode::Soft)
        .map_err(|e| fail(EXIT_FAILURE, e))?;
    let mut patches: Vec<_> = entry.patches.iter().collect();
    patches.sort_by_key(|p| p.patch_id);
    let nodes: Vec<_> = patches
        .iter()
        .enumerate()
        .map(|(k, p)| json!({"patch_id": p.patch_id, "row": p.row, "col": p.col, "features": sample.features.row(k)}))
        .collect();
    let mut edges = Vec::new();
    for s in 0..a.rows() {
        for t in (s + 1)..a.rows() {
            let w = a.get(s, t);
            if w >= min_weight {
                edges.push(json!({"source": patches[s].patch_id, "target": patches[t].patch_id, "weight": w}));
            }
        }
    }
    println!("{} nodes, {} edges", nodes.len(), edges.len());
    write_json(out, &json!({"image_id": image, "label": sample.label, "nodes": nodes, "edges": edges}))
}

fn parse_op(name: &str) -> Option<OpKind> {
    let all = [
        OpKind::MatMul,
        OpKind::Add,
        OpKind::Mul,
        OpKind::AddBias,
        OpKind::Relu,
        OpKind::Sigmoid,
        OpKind::Dropout,
        OpKind::MeanRows,
        OpKind::ConcatCols,
        OpKind::AbsSum,
        OpKind::Sum,
        OpKind::ScalarMul,
        OpKind::ScalarAdd,
        OpKind::SoftmaxRows,
        OpKind::SoftmaxCrossEntropy,
        OpKind::PairwiseConcatLinear,
        OpKind::Reshape,
        OpKind::SymmetrizeUnitDiag,
        OpKind::SymNormalize,
    ];
    let norm = |s: &str| s.to_lowercase().replace(['_', '-'], "");
    all.into_iter().find(|k| norm(&format!("{k:?}")) == norm(name))
}

fn cmd_gradcheck(inject: Option<&str>) -> CmdResult {
    let fault = match inject {
        Some(name) => Some(parse_op(name).ok_or_else(|| fail(EXIT_FAILURE, format!("unknown op '{name}'")))?),
        None => None,
    };
    let results = gradcheck::run_suite(fault);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!("{:<width$}  {:.3e}  {}", r.name, r.max_rel_error, if r.passed { "ok" } else { "FAIL" });
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed (tolerance {:e})", results.len(), failed, gradcheck::TOLERANCE);
    if failed > 0 {
        return Err(fail(EXIT_FAILURE, format!("{failed} gradient checks failed")));
    }
    Ok(())
}

pub fn main_from_args() -> i32 {
    let cli = Cli::parse();
    run(cli)
}
