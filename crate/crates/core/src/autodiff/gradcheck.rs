use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Outcome of comparing tape gradients against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over checked entries of `|analytic − central| / (|central| + 1e-12)`.
    pub max_rel_err: Real,
    /// Largest absolute discrepancy over checked entries.
    pub max_abs_err: Real,
    pub checked: usize,
    /// `(leaf, entry)` pairs skipped because the one-sided differences disagree,
    /// i.e. the function has a kink there.
    pub excluded: Vec<(usize, usize)>,
}

/// Gradient check where the same tape program provides both the analytic
/// gradient and the perturbed forward values.
pub fn grad_check<F>(f: F, leaves: &[Tensor], eps: Real) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let value = |point: &[Tensor]| -> Result<Real> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = point.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };
    grad_check_with(&f, value, leaves, eps)
}

/// Gradient check with an independent forward evaluator for the finite differences.
pub fn grad_check_with<F, G>(f: F, value: G, leaves: &[Tensor], eps: Real) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    G: Fn(&[Tensor]) -> Result<Real>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().zip(leaves).map(|(&v, t)| grads.wrt(v, t)).collect();

    let eval = |point: &[Tensor]| -> Result<Real> {
        let y = value(point)?;
        if !y.is_finite() {
            return Err(Error::Numeric(format!("function value {y} during gradient check")));
        }
        Ok(y)
    };
    let centre = eval(leaves)?;
    let mut point = leaves.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        checked: 0,
        excluded: Vec::new(),
    };
    for (li, leaf) in leaves.iter().enumerate() {
        for e in 0..leaf.numel() {
            let x = leaf.data()[e];
            point[li].data_mut()[e] = x + eps;
            let plus = eval(&point)?;
            point[li].data_mut()[e] = x - eps;
            let minus = eval(&point)?;
            point[li].data_mut()[e] = x;

            let fwd = (plus - centre) / eps;
            let bwd = (centre - minus) / eps;
            if (fwd - bwd).abs() > 1e3 * eps * (1.0 + fwd.abs() + bwd.abs()) {
                report.excluded.push((li, e));
                continue;
            }
            let central = (plus - minus) / (2.0 * eps);
            let a = analytic[li].data()[e];
            let abs = (a - central).abs();
            report.max_abs_err = report.max_abs_err.max(abs);
            report.max_rel_err = report.max_rel_err.max(abs / (central.abs() + 1e-12));
            report.checked += 1;
        }
    }
    Ok(report)
}
