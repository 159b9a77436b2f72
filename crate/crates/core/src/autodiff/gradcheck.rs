use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const DEFAULT_REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Relative error per input, per coordinate.
    pub rel_errors: Vec<Vec<f64>>,
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars)?;
    let value = out.value();
    if !value.is_scalar() {
        return Err(Error::NonScalarLoss(value.shape().to_vec()));
    }
    let v = value.item();
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("function value {v}")));
    }
    Ok(v)
}

/// Compares reverse-mode gradients of the scalar function `f` against
/// central differences with the given `step`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    grad_check_with_floor(f, inputs, step, tolerance, DEFAULT_REL_FLOOR)
}

pub fn grad_check_with_floor<F>(
    f: F,
    inputs: &[Tensor],
    step: f64,
    tolerance: f64,
    floor: f64,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {step}")));
    }

    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = out.value();
        if v.is_scalar() && !v.item().is_finite() {
            return Err(Error::NonFinite(format!("function value {}", v.item())));
        }
        tape.backward(out)?;
        vars.iter().map(|v| v.grad()).collect()
    };

    let mut numeric = Vec::with_capacity(inputs.len());
    let mut rel_errors = Vec::with_capacity(inputs.len());
    let mut max_rel_error: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        let mut num = input.clone();
        let mut errs = Vec::with_capacity(input.len());
        for k in 0..input.len() {
            let x0 = input.data()[k];
            work[which].data_mut()[k] = x0 + step;
            let plus = evaluate(&f, &work)?;
            work[which].data_mut()[k] = x0 - step;
            let minus = evaluate(&f, &work)?;
            work[which].data_mut()[k] = x0;
            let d = (plus - minus) / (2.0 * step);
            num.data_mut()[k] = d;
            let a = analytic[which].data()[k];
            let rel = (a - d).abs() / a.abs().max(d.abs()).max(floor);
            max_rel_error = max_rel_error.max(rel);
            errs.push(rel);
        }
        numeric.push(num);
        rel_errors.push(errs);
    }

    Ok(GradCheckReport {
        rel_errors,
        analytic,
        numeric,
        max_rel_error,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}
