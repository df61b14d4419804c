//! Named finite-difference checks over every tape primitive and the full
//! generator-to-loss path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::learned_loss_on_tape;
use crate::autodiff::{grad_check_on, Matrix, OpKind, Tape, TensorError, Var};
use crate::model::{gumbel_noise, ArchConfig, ClassifierParams, GeneratorParams, ModelError, ParamList};

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Pass threshold on the max relative error.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub passed: bool,
}

type Loss = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>>;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Keeps entries at least 0.05 from the ReLU/abs kink.
fn off_kink(m: Matrix) -> Matrix {
    m.map(|v| if v.abs() < 0.05 { v + 0.1f64.copysign(v) } else { v })
}

fn weighted(t: &mut Tape, y: Var, seed: u64) -> Result<Var, TensorError> {
    let (r, c) = t.value(y).shape();
    let w = t.constant(random(&mut ChaCha8Rng::seed_from_u64(seed), r, c));
    let p = t.mul(y, w)?;
    t.sum(p)
}

fn primitive_checks(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Loss, Vec<Matrix>)> {
    let mut out: Vec<(&'static str, Loss, Vec<Matrix>)> = Vec::new();
    let a = random(rng, 4, 3);
    let b = random(rng, 3, 5);
    out.push(("matmul", Box::new(|t, v| {
        let y = t.matmul(v[0], v[1])?;
        weighted(t, y, 1)
    }), vec![a, b]));
    out.push(("add", Box::new(|t, v| {
        let y = t.add(v[0], v[1])?;
        weighted(t, y, 2)
    }), vec![random(rng, 3, 4), random(rng, 3, 4)]));
    out.push(("mul", Box::new(|t, v| {
        let y = t.mul(v[0], v[1])?;
        weighted(t, y, 3)
    }), vec![random(rng, 3, 4), random(rng, 3, 4)]));
    out.push(("add_bias", Box::new(|t, v| {
        let y = t.add_bias(v[0], v[1])?;
        weighted(t, y, 4)
    }), vec![random(rng, 5, 3), random(rng, 1, 3)]));
    out.push(("relu", Box::new(|t, v| {
        let y = t.relu(v[0])?;
        weighted(t, y, 5)
    }), vec![off_kink(random(rng, 4, 4))]));
    out.push(("sigmoid", Box::new(|t, v| {
        let y = t.sigmoid(v[0])?;
        weighted(t, y, 6)
    }), vec![random(rng, 4, 4).map(|x| 4.0 * x)]));
    out.push(("softmax_rows", Box::new(|t, v| {
        let y = t.softmax_rows(v[0])?;
        weighted(t, y, 7)
    }), vec![random(rng, 3, 5).map(|x| 3.0 * x)]));
    out.push(("dropout", Box::new(|t, v| {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let y = t.dropout(v[0], 0.3, &mut r, true)?;
        weighted(t, y, 8)
    }), vec![random(rng, 4, 5)]));
    out.push(("mean_rows", Box::new(|t, v| {
        let y = t.mean_rows(v[0])?;
        weighted(t, y, 9)
    }), vec![random(rng, 5, 3)]));
    out.push(("concat_cols", Box::new(|t, v| {
        let y = t.concat_cols(&[v[0], v[1], v[0]])?;
        weighted(t, y, 10)
    }), vec![random(rng, 2, 3), random(rng, 2, 2)]));
    out.push(("abs_sum", Box::new(|t, v| t.abs_sum(v[0])), vec![off_kink(random(rng, 3, 3))]));
    out.push(("scalar_mul_add", Box::new(|t, v| {
        let y = t.scalar_mul(v[0], -2.5)?;
        let y = t.scalar_add(y, 0.75)?;
        weighted(t, y, 11)
    }), vec![random(rng, 3, 2)]));
    let targets = [2usize, 0, 1, 1];
    out.push(("softmax_cross_entropy", Box::new(move |t, v| t.softmax_cross_entropy(v[0], &targets)), vec![
        random(rng, 4, 3).map(|x| 3.0 * x),
    ]));
    out.push(("pairwise_concat_linear", Box::new(|t, v| {
        let y = t.pairwise_concat_linear(v[0], v[1])?;
        weighted(t, y, 12)
    }), vec![random(rng, 4, 3), random(rng, 6, 5)]));
    out.push(("reshape", Box::new(|t, v| {
        let y = t.reshape(v[0], 2, 6)?;
        weighted(t, y, 13)
    }), vec![random(rng, 4, 3)]));
    out.push(("symmetrize_unit_diag", Box::new(|t, v| {
        let y = t.symmetrize_unit_diag(v[0])?;
        weighted(t, y, 14)
    }), vec![random(rng, 5, 5)]));
    out.push(("sym_normalize", Box::new(|t, v| {
        let y = t.sym_normalize(v[0])?;
        weighted(t, y, 15)
    }), vec![random(rng, 5, 5).map(|x| 0.55 + 0.45 * x)]));
    out
}

/// Small architecture so the full path can be differenced entry by entry.
pub fn check_arch(d: usize) -> ArchConfig {
    ArchConfig { input_dim: d, gcn_dims: vec![6, 5, 4], head_dims: vec![5], classes: 3, generator_dims: vec![6, 4], dropout: 0.2 }
}

/// Loss through generator, Gumbel-Sigmoid with frozen noise, symmetrize,
/// normalize, GCN, JK head and cross-entropy plus penalty. The leading
/// variables are θ tensors, then ψ tensors, then `x`.
fn pipeline(
    n: usize,
    d: usize,
    seed: u64,
    wrt_theta: bool,
    wrt_psi: bool,
) -> Result<(Loss, Vec<Matrix>), ModelError> {
    let arch = check_arch(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = ClassifierParams::init(&arch, &mut rng);
    let mut psi = GeneratorParams::init(&arch, &mut rng);
    // nonzero biases so every branch of the generator is exercised
    for (_, b) in &mut psi.layers {
        *b = Matrix::from_fn(1, b.cols(), |_, _| rng.random_range(-0.2..0.2));
    }
    let x = random(&mut rng, n, d);
    let noise = gumbel_noise(n, n, &mut rng);
    let label = rng.random_range(0..arch.classes);
    let (nt, np) = (theta.tensors().len(), psi.tensors().len());

    let mut inputs: Vec<Matrix> = Vec::new();
    if wrt_theta {
        inputs.extend(theta.tensors().into_iter().cloned());
    }
    if wrt_psi {
        inputs.extend(psi.tensors().into_iter().cloned());
    }
    let loss: Loss = Box::new(move |t, v| {
        let mut it = v.iter().copied();
        let mut theta_vars = theta.bind(t, false);
        if wrt_theta {
            let vs: Vec<Var> = it.by_ref().take(nt).collect();
            let (gcn, head) = vs.split_at(theta.gcn.len());
            theta_vars.gcn = gcn.to_vec();
            theta_vars.head = head.chunks(2).map(|c| (c[0], c[1])).collect();
        }
        let mut psi_vars = psi.bind(t, false);
        if wrt_psi {
            let vs: Vec<Var> = it.by_ref().take(np).collect();
            psi_vars.layers = vs.chunks(2).map(|c| (c[0], c[1])).collect();
        }
        let vx = t.constant(x.clone());
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xD0);
        let (loss, _) = learned_loss_on_tape(t, &theta_vars, &psi_vars, vx, label, 0.5, Some(&noise), 1e-2, 0.2, &mut r, true)
            .map_err(|e| match e {
                super::TrainError::Model(ModelError::Tensor(te)) => te,
                other => TensorError::InvalidArgument(other.to_string()),
            })?;
        Ok(loss)
    });
    Ok((loss, inputs))
}

/// Runs every check. `fault` corrupts one backward rule to prove the suite
/// can fail.
pub fn run_suite(fault: Option<OpKind>) -> Vec<CheckResult> {
    let new_tape = || {
        let mut t = Tape::new();
        if let Some(kind) = fault {
            t.inject_fault(kind);
        }
        t
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut cases: Vec<(String, Loss, Vec<Matrix>)> =
        primitive_checks(&mut rng).into_iter().map(|(n, l, x)| (n.to_string(), l, x)).collect();
    let full = [
        ("pipeline_theta_n4", 4, 5, true, false),
        ("pipeline_psi_n5", 5, 5, false, true),
        ("pipeline_both_n6", 6, 4, true, true),
    ];
    for (i, &(name, n, d, wt, wp)) in full.iter().enumerate() {
        match pipeline(n, d, 100 + i as u64, wt, wp) {
            Ok((loss, inputs)) => cases.push((name.to_string(), loss, inputs)),
            Err(_) => cases.push((name.to_string(), Box::new(|_, _| Err(TensorError::InvalidArgument("setup".into()))), vec![])),
        }
    }
    cases
        .into_iter()
        .map(|(name, loss, inputs)| {
            let err = grad_check_on(new_tape, |t, v| loss(t, v), &inputs, STEP).unwrap_or(f64::INFINITY);
            CheckResult { name, max_rel_error: err, passed: err < TOLERANCE }
        })
        .collect()
}
