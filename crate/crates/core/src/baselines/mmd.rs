//! Multi-kernel squared maximum mean discrepancy and the alignment trainer built on it.

use serde::{Deserialize, Serialize};

use crate::baselines::source_only::{run_baseline, BaselineStats};
use crate::data::TrainingData;
use crate::error::{Error, Result};
use crate::nn::{loss, Matrix, Objective};
use crate::osbp::{Model, TrainConfig};
use crate::scalar::Scalar;

/// RBF bandwidths (standard deviations) and the weight of the MMD term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub sigmas: Vec<f64>,
    pub weight: f64,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.1, 0.05, 0.01, 0.0001, 0.00001],
            weight: 1.0,
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::Config("mmd needs at least one kernel bandwidth".into()));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("mmd bandwidths must be positive, got {s}")));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("mmd weight must be >= 0, got {}", self.weight)));
        }
        Ok(())
    }
}

fn check_inputs<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, cfg: &MmdConfig) -> Result<()> {
    cfg.validate()?;
    if a.cols() != b.cols() {
        return Err(Error::shape(format!(
            "mmd inputs have widths {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Validation("mmd needs at least one row on each side".into()));
    }
    Ok(())
}

fn sq_dist<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&u, &v)| acc + (u - v) * (u - v))
}

/// Biased squared MMD summed over kernels `k(x, y) = exp(−‖x − y‖² / (2σ²))`:
/// `mean k(a, a') + mean k(b, b') − 2 mean k(a, b)` per bandwidth.
pub fn mmd2<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, cfg: &MmdConfig) -> Result<T> {
    mmd2_with_grad(a, b, cfg).map(|(v, _, _)| v)
}

/// [`mmd2`] together with its gradients with respect to every row of `a` and `b`.
pub fn mmd2_with_grad<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, cfg: &MmdConfig) -> Result<(T, Matrix<T>, Matrix<T>)> {
    check_inputs(a, b, cfg)?;
    let (n, m, width) = (a.rows(), b.rows(), a.cols());
    let nf = T::from_usize_lossy(n);
    let mf = T::from_usize_lossy(m);
    let two = T::lit(2.0);
    let mut value = T::zero();
    let mut grad_a = Matrix::zeros(n, width);
    let mut grad_b = Matrix::zeros(m, width);

    // Pairwise squared distances are shared by all kernels.
    let d_aa: Vec<T> = (0..n * n).map(|ij| sq_dist(a.row(ij / n), a.row(ij % n))).collect();
    let d_bb: Vec<T> = (0..m * m).map(|ij| sq_dist(b.row(ij / m), b.row(ij % m))).collect();
    let d_ab: Vec<T> = (0..n * m).map(|ij| sq_dist(a.row(ij / m), b.row(ij % m))).collect();

    for &sigma in &cfg.sigmas {
        let inv_two_var = T::lit(1.0 / (2.0 * sigma * sigma));
        let inv_var = T::lit(1.0 / (sigma * sigma));
        let kernel = |d: T| (-d * inv_two_var).exp();

        // Coefficients of each block in the estimator.
        let c_aa = (nf * nf).recip();
        let c_bb = (mf * mf).recip();
        let c_ab = two / (nf * mf);

        // ∂k(x,y)/∂x = −k (x − y) / σ²
        for i in 0..n {
            for j in 0..n {
                let k = kernel(d_aa[i * n + j]);
                value += c_aa * k;
                if i != j {
                    // Both (i,j) and (j,i) terms depend on a_i.
                    let scale = -two * c_aa * k * inv_var;
                    for d in 0..width {
                        grad_a[(i, d)] += scale * (a[(i, d)] - a[(j, d)]);
                    }
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                let k = kernel(d_bb[i * m + j]);
                value += c_bb * k;
                if i != j {
                    let scale = -two * c_bb * k * inv_var;
                    for d in 0..width {
                        grad_b[(i, d)] += scale * (b[(i, d)] - b[(j, d)]);
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..m {
                let k = kernel(d_ab[i * m + j]);
                value -= c_ab * k;
                let scale = c_ab * k * inv_var;
                for d in 0..width {
                    let diff = a[(i, d)] - b[(j, d)];
                    grad_a[(i, d)] += scale * diff;
                    grad_b[(j, d)] -= scale * diff;
                }
            }
        }
    }
    Ok((value, grad_a, grad_b))
}

/// MMD between the first `split` rows of an output and the rest, as a checkable loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdObjective {
    pub split: usize,
    pub config: MmdConfig,
}

impl<T: Scalar> Objective<T> for MmdObjective {
    fn evaluate(&self, output: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        let (a, b) = output.split_rows(self.split);
        let (value, ga, gb) = mmd2_with_grad(&a, &b, &self.config)?;
        Ok((value, ga.vstack(&gb)?))
    }
}

/// Source cross-entropy plus `weight · mmd2` between generator outputs of the source and
/// target batches of each iteration.
pub fn train_mmd<T: Scalar>(
    model: &mut Model<T>,
    data: TrainingData<'_>,
    cfg: &TrainConfig,
    mmd: &MmdConfig,
) -> Result<Vec<BaselineStats>> {
    mmd.validate()?;
    data.validate()?;
    let weight = T::lit(mmd.weight);
    run_baseline(model, data.source, Some(data.target), cfg, |model, xs, ys, xt| {
        let (fs, g_src) = model.generator.forward(xs)?;
        let (logits, c_trace) = model.classifier.forward(&fs)?;
        let (source_loss, logit_grad) = loss::cross_entropy_from_logits(&logits, ys)?;
        let mut fs_grad = model.classifier.backward(c_trace, &logit_grad)?;

        let (ft, g_tgt) = model.generator.forward_keep_stats(xt)?;
        let (distance, grad_s, grad_t) = mmd2_with_grad(&fs, &ft, mmd)?;
        fs_grad.add_assign(&grad_s.map(|g| g * weight))?;
        model.generator.backward(g_src, &fs_grad)?;
        model.generator.backward(g_tgt, &grad_t.map(|g| g * weight))?;
        Ok((source_loss.to_f64_lossless(), distance.to_f64_lossless()))
    })
}
