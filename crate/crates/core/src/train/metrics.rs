use serde::{Deserialize, Serialize};

/// Classification summary; `confusion[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Self {
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total = truth.len();
        let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let mut f1_sum = 0.0;
        for c in 0..classes {
            let tp = confusion[c][c] as f64;
            let fn_ = confusion[c].iter().sum::<usize>() as f64 - tp;
            let fp = (0..classes).map(|r| confusion[r][c]).sum::<usize>() as f64 - tp;
            let denom = 2.0 * tp + fp + fn_;
            f1_sum += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
        }
        Self {
            accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
            macro_f1: if classes > 0 { f1_sum / classes as f64 } else { 0.0 },
            confusion,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.confusion.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
