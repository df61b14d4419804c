use super::{Matrix, Tape, TensorError, Var};

/// Compares the tape gradient of `f` at `x` with central differences.
///
/// Returns `max |analytic - numeric| / max(1, |analytic|)` over all entries.
pub fn grad_check<F>(f: F, x: &Matrix, eps: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, TensorError>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps)
}

/// Like [`grad_check`] but differentiates with respect to several inputs at
/// once, reporting the worst entry across all of them.
pub fn grad_check_many<F>(f: F, xs: &[Matrix], eps: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    grad_check_on(Tape::new, f, xs, eps)
}

/// [`grad_check_many`] with a caller-supplied tape constructor, so a
/// misconfigured tape can be checked too.
pub fn grad_check_on<T, F>(new_tape: T, f: F, xs: &[Matrix], eps: f64) -> Result<f64, TensorError>
where
    T: Fn() -> Tape,
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    if !(eps > 0.0) {
        return Err(TensorError::InvalidArgument(format!("step must be positive, got {eps}")));
    }
    let eval = |inputs: &[Matrix], with_grad: bool| -> Result<(f64, Option<Vec<Matrix>>), TensorError> {
        let mut tape = new_tape();
        let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone(), with_grad)).collect();
        let loss = f(&mut tape, &vars)?;
        let value = tape.scalar(loss);
        if !with_grad {
            return Ok((value, None));
        }
        let mut grads = tape.backward(loss)?;
        let gs = vars
            .iter()
            .zip(inputs)
            .map(|(&v, m)| grads.take(v).unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
            .collect();
        Ok((value, Some(gs)))
    };

    let (_, analytic) = eval(xs, true)?;
    let analytic = analytic.unwrap_or_default();
    let mut inputs = xs.to_vec();
    let mut worst = 0.0f64;
    for k in 0..inputs.len() {
        for idx in 0..inputs[k].len() {
            let orig = inputs[k].data()[idx];
            inputs[k].data_mut()[idx] = orig + eps;
            let (plus, _) = eval(&inputs, false)?;
            inputs[k].data_mut()[idx] = orig - eps;
            let (minus, _) = eval(&inputs, false)?;
            inputs[k].data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[k].data()[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
