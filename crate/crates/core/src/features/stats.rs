use serde::{Deserialize, Serialize};

/// Mean, population SD, min/max ratio and disorder (SD / mean) of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub sd: f64,
    pub min_max_ratio: f64,
    pub disorder: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            mean,
            sd,
            min_max_ratio: ratio(min, max),
            disorder: ratio(sd, mean),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.mean, self.sd, self.min_max_ratio, self.disorder]
    }

    /// `[mean, sd, disorder]`, the layout of the nearest-neighbor block.
    pub fn mean_sd_disorder(self) -> [f64; 3] {
        [self.mean, self.sd, self.disorder]
    }
}

/// `a / b` with `x / 0 -> 0`.
fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}
