//! Layer kinds, their parameters and per-layer forward/backward rules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

/// Declarative description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `y = x·W + b` with `W` of shape `input × output`.
    Affine {
        input: usize,
        output: usize,
    },
    LeakyRelu {
        slope: f64,
    },
    /// Per-feature batch normalization with a learned scale and shift.
    BatchNorm {
        width: usize,
        momentum: f64,
        epsilon: f64,
    },
    /// Identity forward; multiplies the incoming gradient by `-weight` on the way back.
    GradReversal {
        weight: f64,
    },
    /// Inverted dropout mask, active in train mode only.
    Dropout {
        rate: f64,
    },
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BN_EPSILON: f64 = 1e-5;

impl LayerSpec {
    pub fn affine(input: usize, output: usize) -> Self {
        LayerSpec::Affine { input, output }
    }

    pub fn leaky_relu() -> Self {
        LayerSpec::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn batch_norm(width: usize) -> Self {
        LayerSpec::BatchNorm {
            width,
            momentum: DEFAULT_BN_MOMENTUM,
            epsilon: DEFAULT_BN_EPSILON,
        }
    }

    pub fn grad_reversal(weight: f64) -> Self {
        LayerSpec::GradReversal { weight }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Affine { .. } => "affine",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::GradReversal { .. } => "grad_reversal",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            LayerSpec::Affine { input, output } if input == 0 || output == 0 => {
                bad(format!("affine widths must be >= 1, got {input}->{output}"))
            }
            LayerSpec::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => {
                bad(format!("leaky relu slope must lie in (0,1), got {slope}"))
            }
            LayerSpec::BatchNorm {
                width,
                momentum,
                epsilon,
            } if width == 0 || !(0.0..1.0).contains(&momentum) || !(epsilon > 0.0) => bad(format!(
                "batch norm needs width >= 1, momentum in [0,1), epsilon > 0 \
                 (got {width}, {momentum}, {epsilon})"
            )),
            LayerSpec::GradReversal { weight } if !(weight >= 0.0 && weight.is_finite()) => bad(format!(
                "gradient reversal weight must be finite and >= 0, got {weight}"
            )),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                bad(format!("dropout rate must lie in [0,1), got {rate}"))
            }
            _ => Ok(()),
        }
    }

    /// Width this layer requires on its input, if it constrains it.
    pub fn input_width(&self) -> Option<usize> {
        match *self {
            LayerSpec::Affine { input, .. } => Some(input),
            LayerSpec::BatchNorm { width, .. } => Some(width),
            _ => None,
        }
    }

    /// Output width given the input width.
    pub fn output_width(&self, input: usize) -> usize {
        match *self {
            LayerSpec::Affine { output, .. } => output,
            _ => input,
        }
    }
}

/// Optimizer scratch attached to a parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Slots<T> {
    pub velocity: Matrix<T>,
    pub first_moment: Matrix<T>,
    pub second_moment: Matrix<T>,
    pub step: u64,
}

/// A trainable tensor with its accumulated gradient and optimizer slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    pub slots: Slots<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Matrix::zeros(r, c),
            slots: Slots {
                velocity: Matrix::zeros(r, c),
                first_moment: Matrix::zeros(r, c),
                second_moment: Matrix::zeros(r, c),
                step: 0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill_zero();
    }

    /// Resets optimizer slots, keeping value and gradient.
    pub fn reset_slots(&mut self) {
        let (r, c) = self.value.shape();
        self.slots = Param::new(Matrix::<T>::zeros(r, c)).slots;
    }
}

/// A layer with its live state.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Affine {
        weight: Param<T>,
        bias: Param<T>,
    },
    LeakyRelu {
        slope: T,
    },
    BatchNorm {
        gamma: Param<T>,
        beta: Param<T>,
        running_mean: Vec<T>,
        running_var: Vec<T>,
        momentum: T,
        epsilon: T,
    },
    GradReversal {
        weight: T,
    },
    Dropout {
        rate: T,
        rng: ChaCha8Rng,
    },
}

/// Values cached by a train-mode forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache<T> {
    Affine { input: Matrix<T> },
    LeakyRelu { input: Matrix<T> },
    BatchNorm { normalized: Matrix<T>, inv_std: Vec<T> },
    GradReversal,
    Dropout { mask: Vec<T> },
}

impl<T: Scalar> Layer<T> {
    /// Instantiates a validated spec. Affine weights are drawn uniformly from
    /// `±sqrt(1/fan_in)`; biases start at zero.
    pub fn from_spec(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            LayerSpec::Affine { input, output } => {
                let bound = (1.0 / input as f64).sqrt();
                let values = (0..input * output)
                    .map(|_| T::lit(rng.random_range(-bound..=bound)))
                    .collect();
                Layer::Affine {
                    weight: Param::new(Matrix::from_vec(input, output, values)?),
                    bias: Param::new(Matrix::zeros(1, output)),
                }
            }
            LayerSpec::LeakyRelu { slope } => Layer::LeakyRelu { slope: T::lit(slope) },
            LayerSpec::BatchNorm {
                width,
                momentum,
                epsilon,
            } => Layer::BatchNorm {
                gamma: Param::new(Matrix::filled(1, width, T::one())),
                beta: Param::new(Matrix::zeros(1, width)),
                running_mean: vec![T::zero(); width],
                running_var: vec![T::one(); width],
                momentum: T::lit(momentum),
                epsilon: T::lit(epsilon),
            },
            LayerSpec::GradReversal { weight } => Layer::GradReversal { weight: T::lit(weight) },
            LayerSpec::Dropout { rate } => Layer::Dropout {
                rate: T::lit(rate),
                rng: ChaCha8Rng::seed_from_u64(rng.random()),
            },
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Affine { weight, .. } => LayerSpec::Affine {
                input: weight.value.rows(),
                output: weight.value.cols(),
            },
            Layer::LeakyRelu { slope } => LayerSpec::LeakyRelu {
                slope: slope.to_f64_lossless(),
            },
            Layer::BatchNorm {
                gamma,
                momentum,
                epsilon,
                ..
            } => LayerSpec::BatchNorm {
                width: gamma.value.cols(),
                momentum: momentum.to_f64_lossless(),
                epsilon: epsilon.to_f64_lossless(),
            },
            Layer::GradReversal { weight } => LayerSpec::GradReversal {
                weight: weight.to_f64_lossless(),
            },
            Layer::Dropout { rate, .. } => LayerSpec::Dropout {
                rate: rate.to_f64_lossless(),
            },
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Affine { weight, bias } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Affine { weight, bias } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    /// Inference-mode pass: batch norm uses running statistics, dropout is the identity.
    pub(crate) fn eval_forward(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            Layer::Affine { weight, bias } => {
                let mut out = input.matmul(&weight.value)?;
                let b = bias.value.row(0);
                for i in 0..out.rows() {
                    out.row_mut(i).iter_mut().zip(b).for_each(|(o, &bj)| *o += bj);
                }
                Ok(out)
            }
            Layer::LeakyRelu { slope } => {
                let s = *slope;
                Ok(input.map(|x| if x > T::zero() { x } else { s * x }))
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                epsilon,
                ..
            } => {
                if input.cols() != gamma.value.cols() {
                    return Err(Error::shape(format!(
                        "batch norm expects width {}, got {}",
                        gamma.value.cols(),
                        input.cols()
                    )));
                }
                let (g, b) = (gamma.value.row(0), beta.value.row(0));
                let mut out = input.clone();
                for i in 0..out.rows() {
                    for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                        let inv_std = (running_var[j] + *epsilon).sqrt().recip();
                        *x = (*x - running_mean[j]) * inv_std * g[j] + b[j];
                    }
                }
                Ok(out)
            }
            Layer::GradReversal { .. } | Layer::Dropout { .. } => Ok(input.clone()),
        }
    }

    /// `update_stats` controls whether a train-mode batch-norm pass folds its batch
    /// statistics into the running estimates.
    pub(crate) fn forward(
        &mut self,
        input: &Matrix<T>,
        train: bool,
        update_stats: bool,
    ) -> Result<(Matrix<T>, Option<Cache<T>>)> {
        if !train {
            return self.eval_forward(input).map(|out| (out, None));
        }
        match self {
            Layer::Affine { weight, bias } => {
                let mut out = input.matmul(&weight.value)?;
                let b = bias.value.row(0);
                for i in 0..out.rows() {
                    out.row_mut(i).iter_mut().zip(b).for_each(|(o, &bj)| *o += bj);
                }
                Ok((out, Some(Cache::Affine { input: input.clone() })))
            }
            Layer::LeakyRelu { slope } => {
                let s = *slope;
                let out = input.map(|x| if x > T::zero() { x } else { s * x });
                Ok((out, Some(Cache::LeakyRelu { input: input.clone() })))
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                momentum,
                epsilon,
            } => {
                let (n, width) = input.shape();
                if width != gamma.value.cols() {
                    return Err(Error::shape(format!(
                        "batch norm expects width {}, got {width}",
                        gamma.value.cols()
                    )));
                }
                if n == 0 {
                    return Err(Error::Validation(
                        "batch norm needs a non-empty batch in train mode".into(),
                    ));
                }
                let (mean, var) = column_moments(input);
                // Running variance tracks the unbiased estimate.
                let unbias = if n > 1 {
                    T::from_usize_lossy(n) / T::from_usize_lossy(n - 1)
                } else {
                    T::one()
                };
                if update_stats {
                    let keep = *momentum;
                    let take = T::one() - keep;
                    for j in 0..width {
                        running_mean[j] = keep * running_mean[j] + take * mean[j];
                        running_var[j] = keep * running_var[j] + take * var[j] * unbias;
                    }
                }
                let inv_std: Vec<T> = var.iter().map(|&v| (v + *epsilon).sqrt().recip()).collect();
                let mut normalized = input.clone();
                for i in 0..n {
                    for (j, x) in normalized.row_mut(i).iter_mut().enumerate() {
                        *x = (*x - mean[j]) * inv_std[j];
                    }
                }
                let mut out = normalized.clone();
                let (g, b) = (gamma.value.row(0), beta.value.row(0));
                for i in 0..n {
                    for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                        *x = *x * g[j] + b[j];
                    }
                }
                Ok((out, Some(Cache::BatchNorm { normalized, inv_std })))
            }
            Layer::GradReversal { .. } => Ok((input.clone(), Some(Cache::GradReversal))),
            Layer::Dropout { rate, rng } => {
                if *rate == T::zero() {
                    let mask = vec![T::one(); input.as_slice().len()];
                    return Ok((input.clone(), Some(Cache::Dropout { mask })));
                }
                let keep = T::one() - *rate;
                let p_keep = keep.to_f64_lossless();
                let mask: Vec<T> = (0..input.as_slice().len())
                    .map(|_| {
                        if rng.random::<f64>() < p_keep {
                            keep.recip()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let mut out = input.clone();
                out.as_mut_slice().iter_mut().zip(&mask).for_each(|(x, &m)| *x *= m);
                Ok((out, Some(Cache::Dropout { mask })))
            }
        }
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the layer input.
    pub(crate) fn backward(&mut self, cache: Cache<T>, out_grad: &Matrix<T>) -> Result<Matrix<T>> {
        match (self, cache) {
            (Layer::Affine { weight, bias }, Cache::Affine { input }) => {
                let dw = input.t_matmul(out_grad)?;
                weight.grad.add_assign(&dw)?;
                let db = bias.grad.row_mut(0);
                for row in out_grad.iter_rows() {
                    db.iter_mut().zip(row).for_each(|(d, &g)| *d += g);
                }
                out_grad.matmul_t(&weight.value)
            }
            (Layer::LeakyRelu { slope }, Cache::LeakyRelu { input }) => {
                input.check_same_shape(out_grad)?;
                let mut grad = out_grad.clone();
                grad.as_mut_slice()
                    .iter_mut()
                    .zip(input.as_slice())
                    .for_each(|(g, &x)| {
                        if x <= T::zero() {
                            *g *= *slope
                        }
                    });
                Ok(grad)
            }
            (Layer::BatchNorm { gamma, beta, .. }, Cache::BatchNorm { normalized, inv_std }) => {
                normalized.check_same_shape(out_grad)?;
                let (n, width) = out_grad.shape();
                let nf = T::from_usize_lossy(n);
                let g = gamma.value.row(0).to_vec();
                let mut sum_dxhat = vec![T::zero(); width];
                let mut sum_dxhat_xhat = vec![T::zero(); width];
                {
                    let dgamma = gamma.grad.row_mut(0);
                    for i in 0..n {
                        for j in 0..width {
                            let dy = out_grad[(i, j)];
                            let xh = normalized[(i, j)];
                            dgamma[j] += dy * xh;
                            let dxh = dy * g[j];
                            sum_dxhat[j] += dxh;
                            sum_dxhat_xhat[j] += dxh * xh;
                        }
                    }
                }
                let dbeta = beta.grad.row_mut(0);
                for row in out_grad.iter_rows() {
                    dbeta.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
                }
                let mut dx = Matrix::zeros(n, width);
                for i in 0..n {
                    for j in 0..width {
                        let dxh = out_grad[(i, j)] * g[j];
                        dx[(i, j)] =
                            inv_std[j] / nf * (nf * dxh - sum_dxhat[j] - normalized[(i, j)] * sum_dxhat_xhat[j]);
                    }
                }
                Ok(dx)
            }
            (Layer::GradReversal { weight }, Cache::GradReversal) => Ok(out_grad.map(|g| -*weight * g)),
            (Layer::Dropout { .. }, Cache::Dropout { mask }) => {
                if mask.len() != out_grad.as_slice().len() {
                    return Err(Error::shape("dropout gradient does not match cached mask"));
                }
                let mut grad = out_grad.clone();
                grad.as_mut_slice().iter_mut().zip(&mask).for_each(|(g, &m)| *g *= m);
                Ok(grad)
            }
            (layer, _) => Err(Error::Usage(format!(
                "trace entry does not belong to a {} layer",
                layer.spec().name()
            ))),
        }
    }
}

/// Per-column mean and biased variance.
pub(crate) fn column_moments<T: Scalar>(x: &Matrix<T>) -> (Vec<T>, Vec<T>) {
    let (n, width) = x.shape();
    let nf = T::from_usize_lossy(n.max(1));
    let mut mean = vec![T::zero(); width];
    for row in x.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut var = vec![T::zero(); width];
    for row in x.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            let d = v - mean[j];
            var[j] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= nf);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(LayerSpec::affine(0, 3).validate().is_err());
        assert!(LayerSpec::LeakyRelu { slope: 1.0 }.validate().is_err());
        assert!(LayerSpec::LeakyRelu { slope: 0.0 }.validate().is_err());
        assert!(LayerSpec::BatchNorm {
            width: 3,
            momentum: 0.9,
            epsilon: 0.0
        }
        .validate()
        .is_err());
        assert!(LayerSpec::GradReversal { weight: -1.0 }.validate().is_err());
        assert!(LayerSpec::Dropout { rate: 1.0 }.validate().is_err());
        assert!(LayerSpec::batch_norm(4).validate().is_ok());
        assert!(LayerSpec::grad_reversal(1.0).validate().is_ok());
    }

    #[test]
    fn init_is_bounded_by_fan_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = Layer::<f64>::from_spec(&LayerSpec::affine(16, 8), &mut rng).unwrap();
        let Layer::Affine { weight, bias } = layer else {
            unreachable!()
        };
        assert!(weight.value.as_slice().iter().all(|w| w.abs() <= 0.25));
        assert!(bias.value.as_slice().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn spec_round_trips_through_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for spec in [
            LayerSpec::affine(3, 2),
            LayerSpec::leaky_relu(),
            LayerSpec::batch_norm(5),
            LayerSpec::grad_reversal(0.5),
            LayerSpec::Dropout { rate: 0.5 },
        ] {
            assert_eq!(Layer::<f64>::from_spec(&spec, &mut rng).unwrap().spec(), spec);
        }
    }
}
