//! Sequential layer pipelines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layer::{Cache, Layer, LayerSpec, Param};
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Cached intermediates of one forward pass, consumed by exactly one backward pass.
#[derive(Debug)]
pub struct ForwardTrace<T> {
    mode: Mode,
    specs: Vec<LayerSpec>,
    caches: Vec<Cache<T>>,
    output_shape: (usize, usize),
}

impl<T> ForwardTrace<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

/// An ordered pipeline of layers with a train/eval mode.
#[derive(Debug, Clone)]
pub struct LayerStack<T> {
    layers: Vec<Layer<T>>,
    mode: Mode,
}

impl<T: Scalar> Default for LayerStack<T> {
    fn default() -> Self {
        Self {
            layers: Vec::new(),
            mode: Mode::Train,
        }
    }
}

impl<T: Scalar> LayerStack<T> {
    /// Builds a stack from specs, checking that adjacent widths agree.
    /// Parameters are initialized from `seed`.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        check_widths(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .enumerate()
            .map(|(i, s)| Layer::from_spec(s, &mut rng).map_err(|e| e.at_layer(i)))
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            mode: Mode::Train,
        })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(Layer::spec).collect();
        check_widths(&specs)?;
        Ok(Self {
            layers,
            mode: Mode::Train,
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Input width the stack requires, if any layer constrains it.
    pub fn input_width(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| l.spec().input_width())
    }

    /// Output width for a given input width.
    pub fn output_width(&self, input: usize) -> usize {
        self.layers.iter().fold(input, |w, l| l.spec().output_width(w))
    }

    pub fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.layers.iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }

    pub fn num_params(&self) -> usize {
        self.params().map(Param::len).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params_mut().for_each(Param::zero_grad);
    }

    /// Runs the pipeline. In train mode batch-norm uses (and updates) batch statistics
    /// and the returned trace can be fed to [`LayerStack::backward`].
    pub fn forward(&mut self, input: &Matrix<T>) -> Result<(Matrix<T>, ForwardTrace<T>)> {
        self.forward_impl(input, true)
    }

    /// Train-mode forward that normalizes with batch statistics but leaves batch-norm
    /// running statistics unchanged.
    pub fn forward_keep_stats(&mut self, input: &Matrix<T>) -> Result<(Matrix<T>, ForwardTrace<T>)> {
        self.forward_impl(input, false)
    }

    fn forward_impl(&mut self, input: &Matrix<T>, update_stats: bool) -> Result<(Matrix<T>, ForwardTrace<T>)> {
        if let Some(w) = self.input_width() {
            if input.cols() != w {
                return Err(Error::Shape {
                    layer: Some(0),
                    message: format!("expected input width {w}, got {}", input.cols()),
                });
            }
        }
        if !input.is_finite() {
            return Err(Error::Validation("non-finite value in stack input".into()));
        }
        let train = self.mode == Mode::Train;
        let mut caches = Vec::with_capacity(if train { self.layers.len() } else { 0 });
        let mut current = input.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let (next, cache) = layer
                .forward(&current, train, update_stats)
                .map_err(|e| e.at_layer(i))?;
            if !next.is_finite() {
                return Err(Error::Validation(format!("layer {i} produced a non-finite value")));
            }
            caches.extend(cache);
            current = next;
        }
        let trace = ForwardTrace {
            mode: self.mode,
            specs: self.specs(),
            caches,
            output_shape: current.shape(),
        };
        Ok((current, trace))
    }

    /// Inference pass that ignores the stack mode and never mutates state: batch norm
    /// uses running statistics and dropout is off. Safe to call concurrently.
    pub fn predict(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        if let Some(w) = self.input_width() {
            if input.cols() != w {
                return Err(Error::Shape {
                    layer: Some(0),
                    message: format!("expected input width {w}, got {}", input.cols()),
                });
            }
        }
        if !input.is_finite() {
            return Err(Error::Validation("non-finite value in stack input".into()));
        }
        let mut current = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.eval_forward(&current).map_err(|e| e.at_layer(i))?;
        }
        if !current.is_finite() {
            return Err(Error::Validation("stack produced a non-finite value".into()));
        }
        Ok(current)
    }

    /// Forward pass without keeping a trace.
    pub fn infer(&mut self, input: &Matrix<T>) -> Result<Matrix<T>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Back-propagates `out_grad`, accumulating parameter gradients, and returns the
    /// gradient with respect to the stack input.
    pub fn backward(&mut self, trace: ForwardTrace<T>, out_grad: &Matrix<T>) -> Result<Matrix<T>> {
        if trace.mode != Mode::Train {
            return Err(Error::Usage("cannot back-propagate through an eval-mode trace".into()));
        }
        if trace.specs.len() != self.layers.len() || trace.specs.iter().zip(&self.layers).any(|(s, l)| *s != l.spec()) {
            return Err(Error::Usage("trace was produced by a different stack".into()));
        }
        if out_grad.shape() != trace.output_shape {
            return Err(Error::shape(format!(
                "output gradient is {}x{}, forward output was {}x{}",
                out_grad.rows(),
                out_grad.cols(),
                trace.output_shape.0,
                trace.output_shape.1
            )));
        }
        let mut grad = out_grad.clone();
        for (i, (layer, cache)) in self.layers.iter_mut().zip(trace.caches).enumerate().rev() {
            grad = layer.backward(cache, &grad).map_err(|e| e.at_layer(i))?;
            if !grad.is_finite() {
                return Err(Error::Validation(format!("non-finite gradient at layer {i}")));
            }
        }
        Ok(grad)
    }
}

fn check_widths(specs: &[LayerSpec]) -> Result<()> {
    let mut width: Option<usize> = None;
    for (i, spec) in specs.iter().enumerate() {
        spec.validate().map_err(|e| e.at_layer(i))?;
        if let (Some(have), Some(want)) = (width, spec.input_width()) {
            if have != want {
                return Err(Error::Shape {
                    layer: Some(i),
                    message: format!("{} expects width {want}, previous layer yields {have}", spec.name()),
                });
            }
        }
        width = match *spec {
            LayerSpec::Affine { output, .. } => Some(output),
            LayerSpec::BatchNorm { width, .. } => Some(width),
            _ => width,
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_affine(w: f64, b: f64) -> LayerStack<f64> {
        let mut stack = LayerStack::new(&[LayerSpec::affine(1, 1)], 0).unwrap();
        if let Layer::Affine { weight, bias } = &mut stack.layers_mut()[0] {
            weight.value[(0, 0)] = w;
            bias.value[(0, 0)] = b;
        }
        stack
    }

    #[test]
    fn empty_stack_is_identity() {
        let mut stack = LayerStack::<f64>::default();
        let x = Matrix::from_rows(&[[1.0, -2.0], [3.0, 4.0]]).unwrap();
        let (y, trace) = stack.forward(&x).unwrap();
        assert_eq!(y, x);
        assert!(trace.is_empty());
    }

    #[test]
    fn identity_affine_passes_input_through() {
        let mut stack = LayerStack::<f64>::new(&[LayerSpec::affine(3, 3)], 1).unwrap();
        if let Layer::Affine { weight, .. } = &mut stack.layers_mut()[0] {
            weight.value = Matrix::identity(3);
        }
        let x = Matrix::from_rows(&[[0.5, -1.0, 2.0]]).unwrap();
        assert_eq!(stack.infer(&x).unwrap(), x);
    }

    #[test]
    fn scalar_affine_forward_and_backward() {
        let mut stack = single_affine(2.0, 1.0);
        let (y, trace) = stack.forward(&Matrix::from_rows(&[[3.0]]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[7.0]);

        let in_grad = stack.backward(trace, &Matrix::from_rows(&[[2.0]]).unwrap()).unwrap();
        assert_eq!(in_grad.as_slice(), &[4.0]);
        let Layer::Affine { weight, bias } = &stack.layers()[0] else {
            unreachable!()
        };
        assert_eq!(weight.grad.as_slice(), &[6.0]);
        assert_eq!(bias.grad.as_slice(), &[2.0]);
    }

    #[test]
    fn grad_reversal_flips_and_scales() {
        for w in [1.0, 0.25, 3.0] {
            let mut stack = LayerStack::<f64>::new(&[LayerSpec::grad_reversal(w)], 0).unwrap();
            let x = Matrix::from_rows(&[[1.5, -2.0, 0.0]]).unwrap();
            let (y, trace) = stack.forward(&x).unwrap();
            assert_eq!(y, x);
            let g = Matrix::from_rows(&[[0.5, 4.0, -1.0]]).unwrap();
            let back = stack.backward(trace, &g).unwrap();
            assert_eq!(back, g.map(|v| -w * v));
        }
    }

    #[test]
    fn width_errors_name_the_layer() {
        let err = LayerStack::<f64>::new(&[LayerSpec::affine(2, 3), LayerSpec::affine(4, 1)], 0).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: Some(1), .. }), "{err}");

        let mut stack = LayerStack::<f64>::new(&[LayerSpec::leaky_relu(), LayerSpec::affine(2, 1)], 0).unwrap();
        assert_eq!(stack.input_width(), Some(2));
        let err = stack.forward(&Matrix::zeros(1, 3)).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: Some(0), .. }));
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut stack = single_affine(1.0, 0.0);
        let x = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(matches!(stack.forward(&x), Err(Error::Validation(_))));
    }

    #[test]
    fn eval_trace_cannot_be_backpropagated() {
        let mut stack = single_affine(1.0, 0.0);
        stack.set_mode(Mode::Eval);
        let (_, trace) = stack.forward(&Matrix::zeros(1, 1)).unwrap();
        assert!(matches!(
            stack.backward(trace, &Matrix::zeros(1, 1)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn foreign_trace_is_rejected() {
        let mut a = single_affine(1.0, 0.0);
        let mut b = LayerStack::<f64>::new(&[LayerSpec::leaky_relu()], 0).unwrap();
        let (_, trace) = b.forward(&Matrix::zeros(1, 1)).unwrap();
        assert!(matches!(a.backward(trace, &Matrix::zeros(1, 1)), Err(Error::Usage(_))));
        let (_, trace) = a.forward(&Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(
            a.backward(trace, &Matrix::zeros(1, 1)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn batch_norm_standardizes_in_train_mode() {
        let mut stack = LayerStack::<f64>::new(&[LayerSpec::batch_norm(3)], 0).unwrap();
        let x = Matrix::from_rows(&[[1.0, 10.0, -3.0], [2.0, 20.0, 5.0], [4.0, 15.0, 0.5], [7.0, 12.0, 1.0]]).unwrap();
        let y = stack.infer(&x).unwrap();
        let (mean, var) = crate::nn::layer::column_moments(&y);
        let Layer::BatchNorm { running_mean, .. } = &stack.layers()[0] else {
            unreachable!()
        };
        let tracked = running_mean.clone();
        stack.forward_keep_stats(&x).unwrap();
        let Layer::BatchNorm { running_mean, .. } = &stack.layers()[0] else {
            unreachable!()
        };
        assert_eq!(running_mean, &tracked);
        let eps = 1e-5;
        for j in 0..3 {
            assert!(mean[j].abs() < 1e-8);
            let (_, raw_var) = crate::nn::layer::column_moments(&x);
            // Normalizing by sqrt(var + eps) leaves var / (var + eps).
            assert!((var[j] - raw_var[j] / (raw_var[j] + eps)).abs() < 1e-12);
            assert!((var[j] - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn batch_norm_eval_uses_running_statistics() {
        let mut stack = LayerStack::<f64>::new(&[LayerSpec::batch_norm(1)], 0).unwrap();
        stack.set_mode(Mode::Eval);
        let x = Matrix::from_rows(&[[2.0], [4.0]]).unwrap();
        // Fresh running stats are mean 0, var 1.
        let y = stack.infer(&x).unwrap();
        let scale = (1.0f64 + 1e-5).sqrt().recip();
        assert!((y[(0, 0)] - 2.0 * scale).abs() < 1e-15);
        assert!((y[(1, 0)] - 4.0 * scale).abs() < 1e-15);
    }

    #[test]
    fn dropout_is_identity_in_eval() {
        let mut stack = LayerStack::<f64>::new(&[LayerSpec::Dropout { rate: 0.5 }], 9).unwrap();
        let x = Matrix::filled(4, 8, 1.0);
        let y = stack.infer(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0 || v == 2.0));
        stack.set_mode(Mode::Eval);
        assert_eq!(stack.infer(&x).unwrap(), x);
    }
}
