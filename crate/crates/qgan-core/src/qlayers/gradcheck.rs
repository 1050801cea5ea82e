//! Finite-difference gradient checking against the scalar probe loss
//! `sum ||output||^2` over the whole output batch.

use crate::error::Result;
use crate::qlayers::DiffBlock;
use crate::tensor::TensorOps;

/// Outcome of one gradient check: worst relative error over all parameters
/// and over all input components.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_param_err: f64,
    pub max_input_err: f64,
    pub step: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_param_err < self.tol && self.max_input_err < self.tol
    }

    pub fn worst(&self) -> f64 {
        self.max_param_err.max(self.max_input_err)
    }
}

/// Relative error with a floor tied to the block's gradient scale, so that
/// near-zero gradients are compared absolutely instead of amplifying
/// finite-difference round-off.
fn relative_error(numeric: f64, analytic: f64, grad_scale: f64) -> f64 {
    let floor = (1e-6 * grad_scale).max(1e-6);
    (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(floor)
}

fn probe_loss<B: DiffBlock>(block: &mut B, inputs: &[B::Tensor]) -> Result<f64> {
    let ys = block.forward(inputs, true)?;
    Ok(ys.iter().map(|y| y.sq_sum()).sum())
}

/// Compare a block's analytic gradients (parameters and inputs) against
/// central finite differences of the probe loss.
pub fn gradient_check<B: DiffBlock>(
    block: &mut B,
    inputs: &[B::Tensor],
    step: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    // Analytic pass: d(loss)/d(output) = 2 * output.
    block.zero_grads();
    let ys = block.forward(inputs, true)?;
    let seeds: Vec<B::Tensor> = ys.iter().map(|y| y.scaled(2.0)).collect();
    let d_inputs = block.backward(&seeds)?;

    let grad_scale = (0..block.param_len())
        .map(|i| block.param_grad(i).abs())
        .chain(
            d_inputs
                .iter()
                .flat_map(|d| d.flat().iter().map(|v| v.abs())),
        )
        .fold(0.0f64, f64::max);

    let mut max_param_err = 0.0f64;
    for i in 0..block.param_len() {
        let saved = block.param(i);
        block.set_param(i, saved + step);
        let plus = probe_loss(block, inputs)?;
        block.set_param(i, saved - step);
        let minus = probe_loss(block, inputs)?;
        block.set_param(i, saved);
        let numeric = (plus - minus) / (2.0 * step);
        max_param_err =
            max_param_err.max(relative_error(numeric, block.param_grad(i), grad_scale));
    }

    let mut max_input_err = 0.0f64;
    let mut perturbed: Vec<B::Tensor> = inputs.to_vec();
    for item in 0..inputs.len() {
        for j in 0..inputs[item].flat().len() {
            let saved = perturbed[item].flat()[j];
            perturbed[item].flat_mut()[j] = saved + step;
            let plus = probe_loss(block, &perturbed)?;
            perturbed[item].flat_mut()[j] = saved - step;
            let minus = probe_loss(block, &perturbed)?;
            perturbed[item].flat_mut()[j] = saved;
            let numeric = (plus - minus) / (2.0 * step);
            max_input_err = max_input_err
                .max(relative_error(numeric, d_inputs[item].flat()[j], grad_scale));
        }
    }

    Ok(GradCheckReport {
        max_param_err,
        max_input_err,
        step,
        tol,
    })
}
