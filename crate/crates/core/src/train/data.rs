use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::Matrix;

/// One image: its patch feature matrix (`n x 69`, raw) and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image_id: String,
    pub label: usize,
    pub features: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn index_of(&self, image_id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.image_id == image_id)
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.cols())
    }
}

/// Per-feature z-scoring fitted on a set of patches. Constant features get
/// unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(mats: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let mats: Vec<&Matrix> = mats.into_iter().collect();
        let d = mats.first().map_or(0, |m| m.cols());
        let n: usize = mats.iter().map(|m| m.rows()).sum();
        let mut mean = vec![0.0; d];
        for m in &mats {
            for i in 0..m.rows() {
                for (acc, v) in mean.iter_mut().zip(m.row(i)) {
                    *acc += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for m in &mats {
            for i in 0..m.rows() {
                for ((acc, v), mu) in var.iter_mut().zip(m.row(i)).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let sd = (v / n.max(1) as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], scale: vec![1.0; d] }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(m.rows(), m.cols(), |i, j| (m.get(i, j) - self.mean[j]) / self.scale[j])
    }
}

/// Image indices of one train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldSplit {
    pub fn is_disjoint(&self) -> bool {
        let mut all: Vec<usize> = self.train.iter().chain(&self.val).chain(&self.test).copied().collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        all.len() == n
    }
}

/// Indices ordered so that classes alternate, each class shuffled by `seed`.
/// Taking any prefix gives a near-stratified subset.
fn interleaved_order(indices: &[usize], labels: &[usize], seed: u64) -> Vec<usize> {
    let classes = indices.iter().map(|&i| labels[i]).max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in indices {
        per_class[labels[i]].push(i);
    }
    for list in &mut per_class {
        list.shuffle(&mut rng);
    }
    let longest = per_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(indices.len());
    for k in 0..longest {
        for list in &per_class {
            if let Some(&i) = list.get(k) {
                out.push(i);
            }
        }
    }
    out
}

/// Splits development images into (train, val) with `round(0.2 * n)` images
/// for validation.
pub fn dev_split(dev: &[usize], labels: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let order = interleaved_order(dev, labels, seed);
    let n_val = (0.2 * dev.len() as f64).round() as usize;
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

/// `k` stratified image-level folds, each with its own dev split.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<FoldSplit>, TrainError> {
    if k < 2 {
        return Err(TrainError::Config(format!("need at least 2 folds, got {k}")));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let order = interleaved_order(&all, labels, seed);
    // contiguous chunks of the class-alternating order stay stratified
    let n = order.len();
    let folds: Vec<Vec<usize>> = (0..k).map(|f| order[f * n / k..(f + 1) * n / k].to_vec()).collect();
    let mut out = Vec::with_capacity(k);
    for f in 0..k {
        let mut test = folds[f].clone();
        test.sort_unstable();
        let mut dev: Vec<usize> = folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.clone()).collect();
        dev.sort_unstable();
        let (train, val) = dev_split(&dev, labels, seed.wrapping_add(1 + f as u64));
        if test.is_empty() || train.is_empty() || val.is_empty() {
            return Err(TrainError::FoldTooSmall { fold: f, images: labels.len(), folds: k });
        }
        out.push(FoldSplit { train, val, test });
    }
    Ok(out)
}

/// Single stratified split holding out `round(n * test_fraction)` images.
pub fn single_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<FoldSplit, TrainError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(TrainError::Config(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let order = interleaved_order(&all, labels, seed);
    let n_test = (labels.len() as f64 * test_fraction).round() as usize;
    let mut test = order[..n_test].to_vec();
    let mut dev = order[n_test..].to_vec();
    test.sort_unstable();
    dev.sort_unstable();
    let (train, val) = dev_split(&dev, labels, seed.wrapping_add(1));
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::FoldTooSmall { fold: 0, images: labels.len(), folds: 1 });
    }
    Ok(FoldSplit { train, val, test })
}

/// Cosine-threshold adjacency over raw patch vectors: edge iff similarity
/// strictly exceeds `threshold`; unit diagonal.
pub fn cosine_adjacency(features: &Matrix, threshold: f64) -> Matrix {
    let n = features.rows();
    let norms: Vec<f64> = (0..n).map(|i| features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let denom = norms[i] * norms[j];
        let cos = if denom > 0.0 {
            features.row(i).iter().zip(features.row(j)).map(|(a, b)| a * b).sum::<f64>() / denom
        } else {
            0.0
        };
        if cos > threshold {
            1.0
        } else {
            0.0
        }
    })
}
