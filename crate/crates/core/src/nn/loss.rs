//! Softmax, the source cross-entropy and the adversarial unknown-class loss.

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

/// Probabilities are kept at least `PROB_EPS` away from 0 (and, in the binary loss, from 1)
/// before taking logs.
pub const PROB_EPS: f64 = 1e-7;

fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = T::lit(PROB_EPS);
    p.max(eps).min(T::one() - eps)
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Matrix<T>) -> Result<Matrix<T>> {
    if !logits.is_finite() {
        return Err(Error::Validation("non-finite logits".into()));
    }
    let mut probs = logits.clone();
    for i in 0..probs.rows() {
        let row = probs.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(probs)
}

/// Mean negative log-likelihood of `labels` under `probs`, together with the gradient
/// with respect to the logits that produced `probs` (softmax and cross-entropy fused):
/// `(probs - onehot) / batch`.
pub fn cross_entropy<T: Scalar>(probs: &Matrix<T>, labels: &[usize]) -> Result<(T, Matrix<T>)> {
    let (n, width) = probs.shape();
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{n} probability rows but {} labels",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(Error::Validation("cross entropy over an empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= width) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {width} classes"
        )));
    }
    let nf = T::from_usize_lossy(n);
    let mut loss = T::zero();
    let mut grad = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs[(i, y)].max(T::lit(PROB_EPS)).ln();
        grad[(i, y)] -= T::one();
    }
    grad.scale(nf.recip());
    Ok((loss / nf, grad))
}

/// Binary cross-entropy between each unknown-class probability and the constant `t`:
/// mean of `-t ln p - (1-t) ln(1-p)`. Returns the loss and its gradient with respect to
/// each `p`.
pub fn adv_bce<T: Scalar>(p_unknown: &[T], t: f64) -> Result<(T, Vec<T>)> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("t must lie in (0,1), got {t}")));
    }
    if p_unknown.is_empty() {
        return Err(Error::Validation("adversarial loss over an empty batch".into()));
    }
    let nf = T::from_usize_lossy(p_unknown.len());
    let t = T::lit(t);
    let one = T::one();
    let mut loss = T::zero();
    let grad = p_unknown
        .iter()
        .map(|&p| {
            let p = clamp_prob(p);
            loss -= t * p.ln() + (one - t) * (one - p).ln();
            (-t / p + (one - t) / (one - p)) / nf
        })
        .collect();
    Ok((loss / nf, grad))
}

/// Binary entropy `-t ln t - (1-t) ln(1-t)`: the minimum of [`adv_bce`].
pub fn binary_entropy(t: f64) -> f64 {
    -t * t.ln() - (1.0 - t) * (1.0 - t).ln()
}

/// Pulls a gradient on one softmax column back to the logits:
/// `dL/dl_j = g · p_c (δ_cj − p_j)` per row.
pub fn softmax_column_backward<T: Scalar>(probs: &Matrix<T>, column: usize, col_grad: &[T]) -> Result<Matrix<T>> {
    if col_grad.len() != probs.rows() {
        return Err(Error::shape(format!(
            "{} column gradients for {} rows",
            col_grad.len(),
            probs.rows()
        )));
    }
    if column >= probs.cols() {
        return Err(Error::shape(format!(
            "column {column} out of range for width {}",
            probs.cols()
        )));
    }
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for (i, &g) in col_grad.iter().enumerate() {
        let pc = probs[(i, column)];
        for j in 0..probs.cols() {
            let delta = if j == column { T::one() } else { T::zero() };
            grad[(i, j)] = g * pc * (delta - probs[(i, j)]);
        }
    }
    Ok(grad)
}

/// Softmax followed by [`adv_bce`] on column `column`; gradient w.r.t. the logits.
pub fn adv_bce_from_logits<T: Scalar>(logits: &Matrix<T>, column: usize, t: f64) -> Result<(T, Matrix<T>, Vec<T>)> {
    let probs = softmax(logits)?;
    let p = probs.column(column);
    let (loss, p_grad) = adv_bce(&p, t)?;
    let grad = softmax_column_backward(&probs, column, &p_grad)?;
    Ok((loss, grad, p))
}

/// Softmax followed by [`cross_entropy`]; gradient w.r.t. the logits.
pub fn cross_entropy_from_logits<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<(T, Matrix<T>)> {
    cross_entropy(&softmax(logits)?, labels)
}
