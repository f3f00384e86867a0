//! Central finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::nn::layer::{Layer, LayerSpec};
use crate::nn::loss;
use crate::nn::matrix::Matrix;
use crate::nn::stack::LayerStack;
use crate::scalar::Scalar;

/// Relative errors are measured against `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-6;
pub const DEFAULT_EPS: f64 = 1e-5;

/// A scalar loss on a stack's output.
pub trait Objective<T> {
    /// Loss value and gradient with respect to `output`.
    fn evaluate(&self, output: &Matrix<T>) -> Result<(T, Matrix<T>)>;
}

/// The two losses of the method, applied to logits.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedLoss {
    /// Softmax cross-entropy against class labels.
    CrossEntropy { labels: Vec<usize> },
    /// Adversarial binary cross-entropy on the last softmax column.
    AdvBce { t: f64 },
}

impl NamedLoss {
    pub fn name(&self) -> &'static str {
        match self {
            NamedLoss::CrossEntropy { .. } => "cross_entropy",
            NamedLoss::AdvBce { .. } => "adv_bce",
        }
    }
}

impl<T: Scalar> Objective<T> for NamedLoss {
    fn evaluate(&self, output: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        match self {
            NamedLoss::CrossEntropy { labels } => loss::cross_entropy_from_logits(output, labels),
            NamedLoss::AdvBce { t } => {
                let column = output.cols().saturating_sub(1);
                loss::adv_bce_from_logits(output, column, *t).map(|(l, g, _)| (l, g))
            }
        }
    }
}

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Number of parameter and input entries compared.
    pub entries: usize,
}

/// Compares the analytic gradient of `objective ∘ stack` at `input` against central
/// differences for every parameter. A stack without parameters yields 0.
///
/// Gradient-reversal layers make the analytic gradient of anything upstream of them the
/// gradient of `-weight · loss`; the numeric side applies the same factor per position.
/// The stack is cloned for each evaluation so batch-norm running statistics and dropout
/// masks are identical across perturbations.
pub fn grad_check<T: Scalar>(
    stack: &LayerStack<T>,
    objective: &dyn Objective<T>,
    input: &Matrix<T>,
    eps: f64,
) -> Result<GradCheck> {
    run(stack, objective, input, eps, false, None)
}

/// [`grad_check`] extended to every entry of `input` as well.
pub fn grad_check_with_inputs<T: Scalar>(
    stack: &LayerStack<T>,
    objective: &dyn Objective<T>,
    input: &Matrix<T>,
    eps: f64,
) -> Result<GradCheck> {
    run(stack, objective, input, eps, true, None)
}

/// Same as [`grad_check_with_inputs`] with the analytic gradients scaled by `factor`, simulating a
/// broken backward pass. Used to exercise failure reporting.
#[doc(hidden)]
pub fn grad_check_corrupted<T: Scalar>(
    stack: &LayerStack<T>,
    objective: &dyn Objective<T>,
    input: &Matrix<T>,
    eps: f64,
    factor: f64,
) -> Result<GradCheck> {
    run(stack, objective, input, eps, true, Some(factor))
}

fn run<T: Scalar>(
    stack: &LayerStack<T>,
    objective: &dyn Objective<T>,
    input: &Matrix<T>,
    eps: f64,
    include_inputs: bool,
    corrupt: Option<f64>,
) -> Result<GradCheck> {
    let mut analytic_stack = stack.clone();
    analytic_stack.zero_grads();
    let (out, trace) = analytic_stack.forward(input)?;
    let (_, out_grad) = objective.evaluate(&out)?;
    let input_grad = analytic_stack.backward(trace, &out_grad)?;

    let loss_at = |s: &LayerStack<T>, x: &Matrix<T>| -> Result<f64> {
        let mut s = s.clone();
        let out = s.infer(x)?;
        Ok(objective.evaluate(&out)?.0.to_f64_lossless())
    };
    let scales = reversal_scales(stack);
    let h = T::lit(eps);
    let corrupt = corrupt.unwrap_or(1.0);
    let mut worst = 0.0f64;
    let mut entries = 0;

    for (layer_index, layer) in analytic_stack.layers().iter().enumerate() {
        for (param_index, param) in layer.params().into_iter().enumerate() {
            for k in 0..param.len() {
                let perturbed = |delta: T| -> Result<f64> {
                    let mut s = stack.clone();
                    let target = &mut s.layers_mut()[layer_index].params_mut()[param_index].value;
                    target.as_mut_slice()[k] += delta;
                    loss_at(&s, input)
                };
                let numeric = (perturbed(h)? - perturbed(-h)?) / (2.0 * eps) * scales[layer_index + 1];
                let analytic = param.grad.as_slice()[k].to_f64_lossless() * corrupt;
                worst = worst.max(rel_error(analytic, numeric));
                entries += 1;
            }
        }
    }

    let input_entries = if include_inputs { input.as_slice().len() } else { 0 };
    for k in 0..input_entries {
        let perturbed = |delta: T| -> Result<f64> {
            let mut x = input.clone();
            x.as_mut_slice()[k] += delta;
            loss_at(stack, &x)
        };
        let numeric = (perturbed(h)? - perturbed(-h)?) / (2.0 * eps) * scales[0];
        let analytic = input_grad.as_slice()[k].to_f64_lossless() * corrupt;
        worst = worst.max(rel_error(analytic, numeric));
        entries += 1;
    }

    Ok(GradCheck {
        max_rel_error: worst,
        entries,
    })
}

/// `scales[i]` is the product of `-weight` over reversal layers at positions `>= i`,
/// i.e. the factor relating the back-propagated gradient at the input of layer `i` to the
/// true derivative of the loss. `scales[len] = 1`.
fn reversal_scales<T: Scalar>(stack: &LayerStack<T>) -> Vec<f64> {
    let mut scales = vec![1.0; stack.len() + 1];
    for (i, layer) in stack.layers().iter().enumerate().rev() {
        let factor = match layer {
            Layer::GradReversal { weight } => -weight.to_f64_lossless(),
            _ => 1.0,
        };
        scales[i] = scales[i + 1] * factor;
    }
    // Parameters of layer i see the gradient arriving at its output, i.e. scales[i + 1].
    scales
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Convenience for building small random stacks in checks and tests.
pub fn mlp_specs(widths: &[usize], batch_norm: bool, slope: f64) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for (i, pair) in widths.windows(2).enumerate() {
        specs.push(LayerSpec::affine(pair[0], pair[1]));
        if i + 2 < widths.len() {
            if batch_norm {
                specs.push(LayerSpec::batch_norm(pair[1]));
            }
            specs.push(LayerSpec::LeakyRelu { slope });
        }
    }
    specs
}
