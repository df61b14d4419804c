use rand::{Rng, SeedableRng};

use super::{glorot, ArchConfig, ModelError, ParamList};
use crate::autodiff::{softmax_in_place, Matrix, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    /// GCN weights, no bias.
    pub gcn: Vec<Matrix>,
    /// Head layers as (weight, 1 x out bias).
    pub head: Vec<(Matrix, Matrix)>,
}

impl ClassifierParams {
    pub fn init<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Self {
        let mut gcn = Vec::with_capacity(arch.gcn_dims.len());
        let mut prev = arch.input_dim;
        for &h in &arch.gcn_dims {
            gcn.push(glorot(prev, h, rng));
            prev = h;
        }
        let mut head = Vec::new();
        let mut prev: usize = arch.gcn_dims.iter().sum();
        for &h in arch.head_dims.iter().chain(std::iter::once(&arch.classes)) {
            head.push((glorot(prev, h, rng), Matrix::zeros(1, h)));
            prev = h;
        }
        Self { gcn, head }
    }

    pub fn classes(&self) -> usize {
        self.head.last().map_or(0, |(w, _)| w.cols())
    }

    pub fn input_dim(&self) -> usize {
        self.gcn.first().map_or(0, Matrix::rows)
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> ClassifierVars {
        ClassifierVars {
            gcn: self.gcn.iter().map(|w| tape.leaf(w.clone(), requires_grad)).collect(),
            head: self
                .head
                .iter()
                .map(|(w, b)| (tape.leaf(w.clone(), requires_grad), tape.leaf(b.clone(), requires_grad)))
                .collect(),
        }
    }
}

impl ParamList for ClassifierParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = self.gcn.iter().collect();
        for (w, b) in &self.head {
            out.push(w);
            out.push(b);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self.gcn.iter_mut().collect();
        for (w, b) in &mut self.head {
            out.push(w);
            out.push(b);
        }
        out
    }

    fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.gcn.len()).map(|l| format!("gcn.{l}.weight")).collect();
        for l in 0..self.head.len() {
            out.push(format!("head.{l}.weight"));
            out.push(format!("head.{l}.bias"));
        }
        out
    }
}

/// Tape handles for a bound [`ClassifierParams`], in the same order as
/// [`ParamList::tensors`] when flattened with [`ClassifierVars::all`].
#[derive(Debug, Clone)]
pub struct ClassifierVars {
    pub gcn: Vec<Var>,
    pub head: Vec<(Var, Var)>,
}

impl ClassifierVars {
    pub fn all(&self) -> Vec<Var> {
        let mut out = self.gcn.clone();
        for &(w, b) in &self.head {
            out.push(w);
            out.push(b);
        }
        out
    }
}

/// Layer outputs `H^(1..L)` with `H^(l+1) = Dropout(ReLU(Â H^(l) W^(l)))`.
pub fn gcn_on_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    a_hat: Var,
    vars: &ClassifierVars,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Vec<Var>, ModelError> {
    let mut h = x;
    let mut layers = Vec::with_capacity(vars.gcn.len());
    for &w in &vars.gcn {
        // associate so the n x n product runs on the narrower side
        let z = if tape.value(h).cols() < tape.value(w).cols() {
            let ah = tape.matmul(a_hat, h)?;
            tape.matmul(ah, w)?
        } else {
            let hw = tape.matmul(h, w)?;
            tape.matmul(a_hat, hw)?
        };
        let z = tape.relu(z)?;
        h = tape.dropout(z, dropout, rng, train)?;
        layers.push(h);
    }
    Ok(layers)
}

/// Mean-pools every layer, concatenates, and runs the head. Returns `1 x C`
/// logits.
pub fn jk_logits_on_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    layers: &[Var],
    vars: &ClassifierVars,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Var, ModelError> {
    let pooled = layers.iter().map(|&h| tape.mean_rows(h)).collect::<Result<Vec<_>, _>>()?;
    let mut z = tape.concat_cols(&pooled)?;
    let last = vars.head.len().saturating_sub(1);
    for (i, &(w, b)) in vars.head.iter().enumerate() {
        z = tape.matmul(z, w)?;
        z = tape.add_bias(z, b)?;
        if i < last {
            z = tape.relu(z)?;
            z = tape.dropout(z, dropout, rng, train)?;
        }
    }
    Ok(z)
}

pub fn classifier_logits_on_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    a_hat: Var,
    vars: &ClassifierVars,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Var, ModelError> {
    let layers = gcn_on_tape(tape, x, a_hat, vars, dropout, rng, train)?;
    jk_logits_on_tape(tape, &layers, vars, dropout, rng, train)
}

/// `D^{-1/2} A D^{-1/2}` for a symmetric adjacency.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix, ModelError> {
    let (n, m) = a.shape();
    if n != m {
        return Err(ModelError::NonSquare(n, m));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a.get(i, j) != a.get(j, i) {
                return Err(ModelError::AsymmetricInput(i, j));
            }
        }
    }
    let mut tape = Tape::new();
    let va = tape.constant(a.clone());
    let out = tape.sym_normalize(va)?;
    Ok(tape.value(out).clone())
}

pub fn gcn_forward<R: Rng + ?Sized>(
    x: &Matrix,
    a_hat: &Matrix,
    theta: &ClassifierParams,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Vec<Matrix>, ModelError> {
    let mut tape = Tape::new();
    let vars = theta.bind(&mut tape, false);
    let (vx, va) = (tape.constant(x.clone()), tape.constant(a_hat.clone()));
    let layers = gcn_on_tape(&mut tape, vx, va, &vars, dropout, rng, train)?;
    Ok(layers.into_iter().map(|v| tape.value(v).clone()).collect())
}

/// Class probabilities from precomputed layer outputs.
pub fn jk_classify<R: Rng + ?Sized>(
    layers: &[Matrix],
    theta: &ClassifierParams,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Vec<f64>, ModelError> {
    if layers.is_empty() {
        return Err(ModelError::Config("no layer outputs to classify".into()));
    }
    let mut tape = Tape::new();
    let vars = theta.bind(&mut tape, false);
    let hs: Vec<Var> = layers.iter().map(|h| tape.constant(h.clone())).collect();
    let logits = jk_logits_on_tape(&mut tape, &hs, &vars, dropout, rng, train)?;
    let mut p = tape.value(logits).data().to_vec();
    softmax_in_place(&mut p);
    Ok(p)
}

/// Eval-mode class probabilities for features `x` over adjacency `a`.
pub fn predict_proba(x: &Matrix, a: &Matrix, theta: &ClassifierParams) -> Result<Vec<f64>, ModelError> {
    let a_hat = normalize_adjacency(a)?;
    // dropout is off, so the generator is never drawn from
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let layers = gcn_forward(x, &a_hat, theta, 0.0, &mut rng, false)?;
    jk_classify(&layers, theta, 0.0, &mut rng, false)
}

pub fn predict(x: &Matrix, a: &Matrix, theta: &ClassifierParams) -> Result<usize, ModelError> {
    Ok(argmax(&predict_proba(x, a, theta)?))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
