use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{cosine_adjacency, single_split, stratified_folds, Dataset, FoldSplit, Standardizer};
use super::metrics::{mean_sd, Metrics};
use super::TrainError;
use crate::autodiff::{Matrix, Tape, Var};
use crate::model::{
    adjacency_on_tape, argmax, classifier_logits_on_tape, eval_adjacency, gumbel_noise, normalize_adjacency,
    pairwise_logits_on_tape, predict_proba, AdjacencyMode, ArchConfig, ClassifierParams, ClassifierVars,
    GeneratorParams, GeneratorVars, ParamList, TemperatureSchedule,
};
use crate::optim::Adam;
use crate::parallel::Exec;

/// How the patch graph is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphMode {
    /// Generator-produced adjacency, trained on the upper level.
    Learned,
    /// Cosine-threshold graph over raw patch vectors; no upper level.
    Fixed { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_theta: f64,
    pub lr_psi: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_sparse: f64,
    pub tau_init: f64,
    pub tau_min: f64,
    pub gamma: f64,
    pub seed: u64,
    pub arch: ArchConfig,
    pub adjacency: AdjacencyMode,
    pub graph: GraphMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_theta: 1e-4,
            lr_psi: 1e-3,
            epochs: 200,
            batch_size: 20,
            lambda_sparse: 1e-4,
            tau_init: 1.0,
            tau_min: 0.1,
            gamma: 0.98,
            seed: 0,
            arch: ArchConfig::default(),
            adjacency: AdjacencyMode::Soft,
            graph: GraphMode::Learned,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lr_theta >= 0.0 && self.lr_theta.is_finite()) || !(self.lr_psi >= 0.0 && self.lr_psi.is_finite()) {
            return bad(format!("learning rates must be finite and non-negative, got {} and {}", self.lr_theta, self.lr_psi));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lambda_sparse >= 0.0 && self.lambda_sparse.is_finite()) {
            return bad(format!("lambda_sparse must be non-negative, got {}", self.lambda_sparse));
        }
        if let GraphMode::Fixed { threshold } = self.graph {
            if !(-1.01..=1.01).contains(&threshold) {
                return bad(format!("cosine threshold out of range: {threshold}"));
            }
        }
        TemperatureSchedule::new(self.tau_init, self.tau_min, self.gamma).map_err(|e| TrainError::Config(e.to_string()))?;
        self.arch.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Per-iteration record backing the loss curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lower_loss: f64,
    /// `None` when there is no upper level (fixed graph).
    pub upper_loss: Option<f64>,
    /// Temperature used during this iteration.
    pub tau: f64,
    /// Mean off-diagonal entry over every adjacency sampled this iteration.
    pub mean_offdiag: f64,
    /// Sampled adjacencies that broke range, symmetry or unit diagonal.
    pub adjacency_violations: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub theta: ClassifierParams,
    pub psi: GeneratorParams,
    pub opt_theta: Adam,
    pub opt_psi: Adam,
    pub schedule: TemperatureSchedule,
    pub iteration: usize,
    pub standardizer: Standardizer,
    pub history: Vec<IterationRecord>,
}

impl TrainState {
    pub fn init(config: &TrainConfig, standardizer: Standardizer) -> Result<Self, TrainError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, 0, Phase::Init, 0));
        let theta = ClassifierParams::init(&config.arch, &mut rng);
        let psi = GeneratorParams::init(&config.arch, &mut rng);
        let opt_theta = Adam::new(config.lr_theta, &theta.tensors());
        let opt_psi = Adam::new(config.lr_psi, &psi.tensors());
        Ok(Self {
            theta,
            psi,
            opt_theta,
            opt_psi,
            schedule: TemperatureSchedule::new(config.tau_init, config.tau_min, config.gamma)?,
            iteration: 0,
            standardizer,
            history: Vec::new(),
        })
    }
}

/// A sample ready for the model: standardized features and, in fixed-graph
/// mode, its normalized adjacency.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub x: Matrix,
    pub label: usize,
    pub fixed_hat: Option<Matrix>,
}

pub fn prepare(
    dataset: &Dataset,
    indices: &[usize],
    standardizer: &Standardizer,
    graph: GraphMode,
) -> Result<Vec<Prepared>, TrainError> {
    indices
        .iter()
        .map(|&i| {
            let s = &dataset.samples[i];
            let fixed_hat = match graph {
                GraphMode::Learned => None,
                GraphMode::Fixed { threshold } => Some(normalize_adjacency(&cosine_adjacency(&s.features, threshold))?),
            };
            Ok(Prepared { x: standardizer.apply(&s.features), label: s.label, fixed_hat })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    Init = 0,
    UpperShuffle = 1,
    LowerShuffle = 2,
    UpperSample = 3,
    LowerSample = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed per (run seed, iteration, phase, index).
pub(crate) fn stream_seed(seed: u64, iteration: usize, phase: Phase, index: usize) -> u64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ iteration as u64);
    h = splitmix(h ^ phase as u64);
    splitmix(h ^ index as u64)
}

/// Builds the learned-graph loss on `tape`: generator logits, Gumbel-Sigmoid
/// with the given noise, symmetrize, normalize, classify, cross-entropy plus
/// `lambda * |A|_1`. Returns (loss, adjacency).
#[allow(clippy::too_many_arguments)]
pub fn learned_loss_on_tape(
    tape: &mut Tape,
    theta: &ClassifierVars,
    psi: &GeneratorVars,
    x: Var,
    label: usize,
    tau: f64,
    noise: Option<&Matrix>,
    lambda: f64,
    dropout: f64,
    rng: &mut ChaCha8Rng,
    train_classifier: bool,
) -> Result<(Var, Var), TrainError> {
    let logits = pairwise_logits_on_tape(tape, x, psi)?;
    let a = adjacency_on_tape(tape, logits, tau, noise)?;
    let a_hat = tape.sym_normalize(a)?;
    let out = classifier_logits_on_tape(tape, x, a_hat, theta, dropout, rng, train_classifier)?;
    let mut loss = tape.softmax_cross_entropy(out, &[label])?;
    if lambda > 0.0 {
        let l1 = tape.abs_sum(a)?;
        let pen = tape.scalar_mul(l1, lambda)?;
        loss = tape.add(loss, pen)?;
    }
    Ok((loss, a))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct AdjStats {
    violations: usize,
    offdiag_sum: f64,
    offdiag_count: usize,
}

impl AdjStats {
    fn of(a: &Matrix) -> Self {
        let n = a.rows();
        let mut ok = true;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                ok &= (0.0..=1.0).contains(&v) && v == a.get(j, i);
                if i == j {
                    ok &= v == 1.0;
                } else {
                    sum += v;
                }
            }
        }
        Self { violations: usize::from(!ok), offdiag_sum: sum, offdiag_count: n * n - n }
    }

    fn merge(&mut self, o: Self) {
        self.violations += o.violations;
        self.offdiag_sum += o.offdiag_sum;
        self.offdiag_count += o.offdiag_count;
    }
}

struct SampleResult {
    loss: f64,
    grads: Vec<Matrix>,
    adj: AdjStats,
}

fn sum_in_order(results: &[SampleResult], template: &[&Matrix]) -> Vec<Matrix> {
    let mut total: Vec<Matrix> = template.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
    for r in results {
        for (acc, g) in total.iter_mut().zip(&r.grads) {
            acc.add_assign(g);
        }
    }
    let inv = 1.0 / results.len() as f64;
    total.iter_mut().for_each(|g| g.scale(inv));
    total
}

/// Batch statistics returned by one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub mean_loss: f64,
    pub samples: usize,
    adj: AdjStats,
}

impl StepOutcome {
    pub fn adjacency_violations(&self) -> usize {
        self.adj.violations
    }
}

/// Generator update with θ frozen: loss is cross-entropy plus the L1
/// penalty, gradients flow to ψ only.
pub fn upper_step(
    state: &mut TrainState,
    batch: &[&Prepared],
    config: &TrainConfig,
    exec: Exec,
    first_index: usize,
) -> Result<StepOutcome, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let tau = state.schedule.tau;
    let (theta, psi, iteration) = (&state.theta, &state.psi, state.iteration);
    let results = exec.map_indexed(batch.len(), |k| -> Result<SampleResult, TrainError> {
        let sample = batch[k];
        let mut rng =
            ChaCha8Rng::seed_from_u64(stream_seed(config.seed, iteration, Phase::UpperSample, first_index + k));
        let n = sample.x.rows();
        let noise = gumbel_noise(n, n, &mut rng);
        let mut tape = Tape::new();
        let tv = theta.bind(&mut tape, false);
        let pv = psi.bind(&mut tape, true);
        let x = tape.constant(sample.x.clone());
        let (loss, a) = learned_loss_on_tape(
            &mut tape,
            &tv,
            &pv,
            x,
            sample.label,
            tau,
            Some(&noise),
            config.lambda_sparse,
            config.arch.dropout,
            &mut rng,
            false,
        )?;
        let mut grads = tape.backward(loss)?;
        let g = pv
            .all()
            .iter()
            .map(|&v| grads.take(v).unwrap_or_else(|| zeros_like(tape.value(v))))
            .collect();
        Ok(SampleResult { loss: tape.scalar(loss), grads: g, adj: AdjStats::of(tape.value(a)) })
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let grads = sum_in_order(&results, &state.psi.tensors());
    state.opt_psi.update(state.psi.tensors_mut(), &grads);
    Ok(outcome(&results))
}

/// Classifier update with ψ frozen: adjacency is still sampled with fresh
/// noise, loss is cross-entropy only.
pub fn lower_step(
    state: &mut TrainState,
    batch: &[&Prepared],
    config: &TrainConfig,
    exec: Exec,
    first_index: usize,
) -> Result<StepOutcome, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let tau = state.schedule.tau;
    let (theta, psi, iteration) = (&state.theta, &state.psi, state.iteration);
    let results = exec.map_indexed(batch.len(), |k| -> Result<SampleResult, TrainError> {
        let sample = batch[k];
        let mut rng =
            ChaCha8Rng::seed_from_u64(stream_seed(config.seed, iteration, Phase::LowerSample, first_index + k));
        let mut tape = Tape::new();
        let tv = theta.bind(&mut tape, true);
        let x = tape.constant(sample.x.clone());
        let (loss, adj) = match &sample.fixed_hat {
            Some(a_hat) => {
                let va = tape.constant(a_hat.clone());
                let out = classifier_logits_on_tape(&mut tape, x, va, &tv, config.arch.dropout, &mut rng, true)?;
                (tape.softmax_cross_entropy(out, &[sample.label])?, AdjStats::default())
            }
            None => {
                let n = sample.x.rows();
                let noise = gumbel_noise(n, n, &mut rng);
                let pv = psi.bind(&mut tape, false);
                let (loss, a) = learned_loss_on_tape(
                    &mut tape,
                    &tv,
                    &pv,
                    x,
                    sample.label,
                    tau,
                    Some(&noise),
                    0.0,
                    config.arch.dropout,
                    &mut rng,
                    true,
                )?;
                (loss, AdjStats::of(tape.value(a)))
            }
        };
        let mut grads = tape.backward(loss)?;
        let g = tv
            .all()
            .iter()
            .map(|&v| grads.take(v).unwrap_or_else(|| zeros_like(tape.value(v))))
            .collect();
        Ok(SampleResult { loss: tape.scalar(loss), grads: g, adj })
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let grads = sum_in_order(&results, &state.theta.tensors());
    state.opt_theta.update(state.theta.tensors_mut(), &grads);
    Ok(outcome(&results))
}

fn zeros_like(m: &Matrix) -> Matrix {
    Matrix::zeros(m.rows(), m.cols())
}

fn outcome(results: &[SampleResult]) -> StepOutcome {
    let mut adj = AdjStats::default();
    for r in results {
        adj.merge(r.adj);
    }
    StepOutcome {
        mean_loss: results.iter().map(|r| r.loss).sum::<f64>() / results.len() as f64,
        samples: results.len(),
        adj,
    }
}

fn shuffled(len: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// One outer iteration: upper pass over all validation batches, lower pass
/// over all training batches, then one anneal.
pub fn run_iteration(
    state: &mut TrainState,
    train: &[Prepared],
    val: &[Prepared],
    config: &TrainConfig,
    exec: Exec,
) -> Result<IterationRecord, TrainError> {
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let tau = state.schedule.tau;
    let mut adj = AdjStats::default();
    let mut samples = 0;

    let upper_loss = match config.graph {
        GraphMode::Fixed { .. } => None,
        GraphMode::Learned => {
            let order = shuffled(val.len(), stream_seed(config.seed, state.iteration, Phase::UpperShuffle, 0));
            let mut total = 0.0;
            for (b, chunk) in order.chunks(config.batch_size).enumerate() {
                let batch: Vec<&Prepared> = chunk.iter().map(|&i| &val[i]).collect();
                let out = upper_step(state, &batch, config, exec, b * config.batch_size)?;
                total += out.mean_loss * out.samples as f64;
                adj.merge(out.adj);
                samples += out.samples;
            }
            Some(total / val.len() as f64)
        }
    };

    let order = shuffled(train.len(), stream_seed(config.seed, state.iteration, Phase::LowerShuffle, 0));
    let mut total = 0.0;
    for (b, chunk) in order.chunks(config.batch_size).enumerate() {
        let batch: Vec<&Prepared> = chunk.iter().map(|&i| &train[i]).collect();
        let out = lower_step(state, &batch, config, exec, b * config.batch_size)?;
        total += out.mean_loss * out.samples as f64;
        adj.merge(out.adj);
        samples += out.samples;
    }

    let record = IterationRecord {
        iteration: state.iteration,
        lower_loss: total / train.len() as f64,
        upper_loss,
        tau,
        mean_offdiag: if adj.offdiag_count > 0 { adj.offdiag_sum / adj.offdiag_count as f64 } else { 0.0 },
        adjacency_violations: adj.violations,
        samples,
    };
    state.schedule.anneal();
    state.iteration += 1;
    state.history.push(record.clone());
    Ok(record)
}

/// Fits the standardizer on the training images and runs `config.epochs`
/// outer iterations.
pub fn train(dataset: &Dataset, split: &FoldSplit, config: &TrainConfig, exec: Exec) -> Result<TrainState, TrainError> {
    train_with(dataset, split, config, exec, |_| {})
}

/// [`train`] with a callback after every iteration.
pub fn train_with(
    dataset: &Dataset,
    split: &FoldSplit,
    config: &TrainConfig,
    exec: Exec,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<TrainState, TrainError> {
    config.validate()?;
    check_dataset(dataset, config)?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(TrainError::Config("train and validation sets must be nonempty".into()));
    }
    let standardizer = Standardizer::fit(split.train.iter().map(|&i| &dataset.samples[i].features));
    let mut state = TrainState::init(config, standardizer)?;
    let train_set = prepare(dataset, &split.train, &state.standardizer, config.graph)?;
    let val_set = prepare(dataset, &split.val, &state.standardizer, config.graph)?;
    for _ in 0..config.epochs {
        let record = run_iteration(&mut state, &train_set, &val_set, config, exec)?;
        on_iteration(&record);
    }
    Ok(state)
}

fn check_dataset(dataset: &Dataset, config: &TrainConfig) -> Result<(), TrainError> {
    if dataset.feature_dim() != config.arch.input_dim {
        return Err(TrainError::Config(format!(
            "features have {} columns but the model expects {}",
            dataset.feature_dim(),
            config.arch.input_dim
        )));
    }
    if let Some(s) = dataset.samples.iter().find(|s| s.label >= config.arch.classes) {
        return Err(TrainError::Config(format!("label {} of {} exceeds class count", s.label, s.image_id)));
    }
    if let Some(s) = dataset.samples.iter().find(|s| s.features.rows() == 0) {
        return Err(TrainError::Config(format!("image {} has no patches", s.image_id)));
    }
    Ok(())
}

/// Adjacency used at inference time for one standardized sample.
pub fn inference_adjacency(
    state: &TrainState,
    raw: &Matrix,
    config: &TrainConfig,
    mode: AdjacencyMode,
) -> Result<Matrix, TrainError> {
    Ok(match config.graph {
        GraphMode::Learned => eval_adjacency(&state.standardizer.apply(raw), &state.psi, state.schedule.tau_min, mode)?,
        GraphMode::Fixed { threshold } => cosine_adjacency(raw, threshold),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub predictions: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
}

pub fn evaluate(
    state: &TrainState,
    dataset: &Dataset,
    indices: &[usize],
    config: &TrainConfig,
    mode: AdjacencyMode,
    exec: Exec,
) -> Result<Evaluation, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    let probs = exec.map(indices, |&i| -> Result<Vec<f64>, TrainError> {
        let s = &dataset.samples[i];
        let a = inference_adjacency(state, &s.features, config, mode)?;
        Ok(predict_proba(&state.standardizer.apply(&s.features), &a, &state.theta)?)
    });
    let probabilities = probs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let predictions: Vec<usize> = probabilities.iter().map(|p| argmax(p)).collect();
    let truth: Vec<usize> = indices.iter().map(|&i| dataset.samples[i].label).collect();
    Ok(Evaluation { metrics: Metrics::from_predictions(&truth, &predictions, config.arch.classes), predictions, probabilities })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub split: FoldSplit,
    pub metrics: Metrics,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_sd: f64,
}

impl CvReport {
    fn from_folds(folds: Vec<FoldResult>) -> Self {
        let acc: Vec<f64> = folds.iter().map(|f| f.metrics.accuracy).collect();
        let f1: Vec<f64> = folds.iter().map(|f| f.metrics.macro_f1).collect();
        let (accuracy_mean, accuracy_sd) = mean_sd(&acc);
        let (macro_f1_mean, macro_f1_sd) = mean_sd(&f1);
        Self { folds, accuracy_mean, accuracy_sd, macro_f1_mean, macro_f1_sd }
    }
}

/// k-fold image-level cross-validation. Each fold trains from a fresh
/// initialization with the same seed.
pub fn cross_validate(dataset: &Dataset, k: usize, config: &TrainConfig, exec: Exec) -> Result<CvReport, TrainError> {
    let splits = stratified_folds(&dataset.labels(), k, config.seed)?;
    let mut folds = Vec::with_capacity(k);
    for (fold, split) in splits.into_iter().enumerate() {
        let state = train(dataset, &split, config, exec)?;
        let eval = evaluate(&state, dataset, &split.test, config, config.adjacency, exec)?;
        folds.push(FoldResult { fold, split, metrics: eval.metrics, history: state.history });
    }
    Ok(CvReport::from_folds(folds))
}

/// Trains and evaluates on one held-out split (a third of the images).
pub fn train_single_split(
    dataset: &Dataset,
    config: &TrainConfig,
    exec: Exec,
) -> Result<(TrainState, FoldSplit, Evaluation), TrainError> {
    let split = single_split(&dataset.labels(), 1.0 / 3.0, config.seed)?;
    let state = train(dataset, &split, config, exec)?;
    let eval = evaluate(&state, dataset, &split.test, config, config.adjacency, exec)?;
    Ok((state, split, eval))
}

/// Same classifier and budget over the fixed cosine graph.
pub fn fixed_graph_baseline(
    dataset: &Dataset,
    config: &TrainConfig,
    threshold: f64,
    exec: Exec,
) -> Result<(TrainState, FoldSplit, Evaluation), TrainError> {
    let config = TrainConfig { graph: GraphMode::Fixed { threshold }, ..config.clone() };
    train_single_split(dataset, &config, exec)
}
