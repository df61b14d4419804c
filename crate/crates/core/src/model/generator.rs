use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot, ArchConfig, ModelError, ParamList};
use crate::autodiff::{sigmoid, Matrix, Tape, Var};

/// Uniform draws are clamped to `[c, 1 - c]` before `-log(-log u)`.
pub const GUMBEL_U_CLAMP: f64 = 1e-10;

/// Pairwise edge MLP: `[x_s || x_t] -> ... -> logit`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub layers: Vec<(Matrix, Matrix)>,
}

impl GeneratorParams {
    pub fn init<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut prev = 2 * arch.input_dim;
        for &h in arch.generator_dims.iter().chain(std::iter::once(&1)) {
            layers.push((glorot(prev, h, rng), Matrix::zeros(1, h)));
            prev = h;
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |(w, _)| w.rows() / 2)
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> GeneratorVars {
        GeneratorVars {
            layers: self
                .layers
                .iter()
                .map(|(w, b)| (tape.leaf(w.clone(), requires_grad), tape.leaf(b.clone(), requires_grad)))
                .collect(),
        }
    }
}

impl ParamList for GeneratorParams {
    fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|(w, b)| [w, b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|(w, b)| [w, b]).collect()
    }

    fn names(&self) -> Vec<String> {
        (0..self.layers.len()).flat_map(|l| [format!("gen.{l}.weight"), format!("gen.{l}.bias")]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorVars {
    pub layers: Vec<(Var, Var)>,
}

impl GeneratorVars {
    pub fn all(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

/// `n x n` logits, entry `(s, t)` from the MLP applied to `[x_s || x_t]`.
pub fn pairwise_logits_on_tape(tape: &mut Tape, x: Var, vars: &GeneratorVars) -> Result<Var, ModelError> {
    let n = tape.value(x).rows();
    let (first, rest) = vars.layers.split_first().ok_or_else(|| ModelError::Config("empty generator".into()))?;
    let mut z = tape.pairwise_concat_linear(x, first.0)?;
    z = tape.add_bias(z, first.1)?;
    for &(w, b) in rest {
        z = tape.relu(z)?;
        z = tape.matmul(z, w)?;
        z = tape.add_bias(z, b)?;
    }
    Ok(tape.reshape(z, n, n)?)
}

pub fn pairwise_logits(x: &Matrix, psi: &GeneratorParams) -> Result<Matrix, ModelError> {
    let mut tape = Tape::new();
    let vars = psi.bind(&mut tape, false);
    let vx = tape.constant(x.clone());
    let out = pairwise_logits_on_tape(&mut tape, vx, &vars)?;
    Ok(tape.value(out).clone())
}

/// I.i.d. standard Gumbel noise.
pub fn gumbel_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let u: f64 = rng.random::<f64>().clamp(GUMBEL_U_CLAMP, 1.0 - GUMBEL_U_CLAMP);
        -(-u.ln()).ln()
    })
}

/// `σ((logits + noise) / τ)`; `noise = None` is the deterministic eval mode.
pub fn gumbel_sigmoid(logits: &Matrix, tau: f64, noise: Option<&Matrix>) -> Result<Matrix, ModelError> {
    if !(tau > 0.0) {
        return Err(ModelError::NonPositiveTemperature(tau));
    }
    let out = match noise {
        Some(g) => {
            if g.shape() != logits.shape() {
                return Err(ModelError::Config(format!("noise shape {:?} vs logits {:?}", g.shape(), logits.shape())));
            }
            Matrix::from_vec(
                logits.rows(),
                logits.cols(),
                logits.data().iter().zip(g.data()).map(|(l, e)| sigmoid((l + e) / tau)).collect(),
            )
        }
        None => logits.map(|l| sigmoid(l / tau)),
    };
    Ok(out)
}

/// `(A + Aᵀ) / 2` with an exact unit diagonal.
pub fn symmetrize_self_loop(a: &Matrix) -> Result<Matrix, ModelError> {
    let (n, m) = a.shape();
    if n != m {
        return Err(ModelError::NonSquare(n, m));
    }
    let mut tape = Tape::new();
    let va = tape.constant(a.clone());
    let out = tape.symmetrize_unit_diag(va)?;
    Ok(tape.value(out).clone())
}

/// Relaxed adjacency on the tape: Gumbel-Sigmoid of `logits` with the given
/// (frozen) noise, then symmetrized with unit diagonal.
pub fn adjacency_on_tape(tape: &mut Tape, logits: Var, tau: f64, noise: Option<&Matrix>) -> Result<Var, ModelError> {
    if !(tau > 0.0) {
        return Err(ModelError::NonPositiveTemperature(tau));
    }
    let shifted = match noise {
        Some(g) => {
            let g = tape.constant(g.clone());
            tape.add(logits, g)?
        }
        None => logits,
    };
    let scaled = tape.scalar_mul(shifted, 1.0 / tau)?;
    let soft = tape.sigmoid(scaled)?;
    Ok(tape.symmetrize_unit_diag(soft)?)
}

/// `λ Σ |A_jk|`, diagonal included.
pub fn sparsity_penalty(a: &Matrix, lambda: f64) -> f64 {
    lambda * a.data().iter().map(|v| v.abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyMode {
    #[default]
    Soft,
    /// Off-diagonal entries `>= 0.5` become 1, the rest 0.
    Hard,
}

impl std::str::FromStr for AdjacencyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            other => Err(format!("unknown adjacency mode '{other}' (expected soft or hard)")),
        }
    }
}

/// Noise-free adjacency at temperature `tau` used at inference time.
pub fn eval_adjacency(x: &Matrix, psi: &GeneratorParams, tau: f64, mode: AdjacencyMode) -> Result<Matrix, ModelError> {
    let logits = pairwise_logits(x, psi)?;
    let soft = symmetrize_self_loop(&gumbel_sigmoid(&logits, tau, None)?)?;
    Ok(match mode {
        AdjacencyMode::Soft => soft,
        AdjacencyMode::Hard => {
            let n = soft.rows();
            Matrix::from_fn(n, n, |i, j| if i == j || soft.get(i, j) >= 0.5 { 1.0 } else { 0.0 })
        }
    })
}

/// Geometric temperature decay with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub tau_init: f64,
    pub tau_min: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl TemperatureSchedule {
    pub fn new(tau_init: f64, tau_min: f64, gamma: f64) -> Result<Self, ModelError> {
        if !(tau_min > 0.0 && tau_min <= tau_init && tau_init.is_finite()) {
            return Err(ModelError::Config(format!("need 0 < tau_min <= tau_init, got {tau_min}, {tau_init}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(ModelError::Config(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { tau_init, tau_min, gamma, tau: tau_init })
    }

    /// `τ <- max(τ_min, γ τ)`; returns the new value.
    pub fn anneal(&mut self) -> f64 {
        self.tau = self.tau_min.max(self.tau * self.gamma);
        self.tau
    }
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self { tau_init: 1.0, tau_min: 0.1, gamma: 0.98, tau: 1.0 }
    }
}
