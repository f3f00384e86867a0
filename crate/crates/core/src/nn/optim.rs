//! Momentum SGD and Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layer::Param;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Velocity form: `v ← momentum·v − lr·g`, `w ← w + v`.
    SgdMomentum { lr: f64, momentum: f64 },
    /// Bias-corrected Adam.
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::SgdMomentum {
            lr: 1e-3,
            momentum: 0.9,
        }
    }
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::SgdMomentum { lr, .. } | Optimizer::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.lr();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        match *self {
            Optimizer::SgdMomentum { momentum, .. } if !(0.0..1.0).contains(&momentum) => {
                Err(Error::Config(format!("momentum must lie in [0,1), got {momentum}")))
            }
            Optimizer::Adam {
                beta1, beta2, epsilon, ..
            } if !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0) || !(epsilon > 0.0) => Err(Error::Config(
                format!("adam needs 0 < beta1, beta2 < 1 and epsilon > 0 (got {beta1}, {beta2}, {epsilon})"),
            )),
            _ => Ok(()),
        }
    }

    /// Applies one update to every parameter and zeroes its gradient.
    pub fn step<'a, T: Scalar>(&self, params: impl IntoIterator<Item = &'a mut Param<T>>) -> Result<()> {
        self.validate()?;
        match *self {
            Optimizer::SgdMomentum { lr, momentum } => {
                params.into_iter().for_each(|p| sgd_momentum_update(p, lr, momentum))
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            } => params
                .into_iter()
                .for_each(|p| adam_update(p, lr, beta1, beta2, epsilon)),
        }
        Ok(())
    }
}

pub fn sgd_momentum_step<'a, T: Scalar>(
    params: impl IntoIterator<Item = &'a mut Param<T>>,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    Optimizer::SgdMomentum { lr, momentum }.step(params)
}

pub fn adam_step<'a, T: Scalar>(
    params: impl IntoIterator<Item = &'a mut Param<T>>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    Optimizer::Adam {
        lr,
        beta1,
        beta2,
        epsilon,
    }
    .step(params)
}

fn sgd_momentum_update<T: Scalar>(p: &mut Param<T>, lr: f64, momentum: f64) {
    let (lr, mu) = (T::lit(lr), T::lit(momentum));
    let values = p.value.as_mut_slice();
    let velocity = p.slots.velocity.as_mut_slice();
    for ((w, v), &g) in values.iter_mut().zip(velocity).zip(p.grad.as_slice()) {
        *v = mu * *v - lr * g;
        *w += *v;
    }
    p.slots.step += 1;
    p.zero_grad();
}

fn adam_update<T: Scalar>(p: &mut Param<T>, lr: f64, beta1: f64, beta2: f64, epsilon: f64) {
    p.slots.step += 1;
    let step = i32::try_from(p.slots.step).unwrap_or(i32::MAX);
    let (b1, b2) = (T::lit(beta1), T::lit(beta2));
    let one = T::one();
    let correct1 = one - b1.powi(step);
    let correct2 = one - b2.powi(step);
    let (lr, eps) = (T::lit(lr), T::lit(epsilon));
    let values = p.value.as_mut_slice();
    let m = p.slots.first_moment.as_mut_slice();
    let v = p.slots.second_moment.as_mut_slice();
    for (((w, m), v), &g) in values.iter_mut().zip(m).zip(v).zip(p.grad.as_slice()) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    p.zero_grad();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::matrix::Matrix;
    use proptest::prelude::*;

    fn scalar_param(w: f64) -> Param<f64> {
        Param::new(Matrix::from_vec(1, 1, vec![w]).unwrap())
    }

    #[test]
    fn sgd_first_and_second_step() {
        let mut p = scalar_param(1.0);
        p.grad[(0, 0)] = 1.0;
        sgd_momentum_step([&mut p], 0.1, 0.9).unwrap();
        assert!((p.value[(0, 0)] - 0.9).abs() < 1e-15);
        assert_eq!(p.grad[(0, 0)], 0.0);

        let before = p.value[(0, 0)];
        p.grad[(0, 0)] = 1.0;
        sgd_momentum_step([&mut p], 0.1, 0.9).unwrap();
        // v2 = 0.9·(−0.1) − 0.1 = −0.19
        assert!((p.value[(0, 0)] - before + 0.19).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut p = scalar_param(0.37);
        sgd_momentum_step([&mut p], 0.1, 0.9).unwrap();
        assert_eq!(p.value[(0, 0)], 0.37);
    }

    #[test]
    fn invalid_hyperparameters() {
        let mut p = scalar_param(0.0);
        assert!(matches!(sgd_momentum_step([&mut p], 0.0, 0.9), Err(Error::Config(_))));
        assert!(matches!(sgd_momentum_step([&mut p], -1.0, 0.9), Err(Error::Config(_))));
        assert!(matches!(
            adam_step([&mut p], 1e-3, 1.0, 0.999, 1e-8),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            adam_step([&mut p], 1e-3, 0.9, 0.0, 1e-8),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = scalar_param(2.0);
        p.grad[(0, 0)] = 1.0;
        adam_step([&mut p], 0.01, 0.9, 0.999, 1e-14).unwrap();
        assert!((2.0 - p.value[(0, 0)] - 0.01).abs() < 1e-10);
        assert_eq!(p.slots.step, 1);
    }

    /// Adam written out on plain scalars, independent of the slot machinery.
    fn adam_oracle(mut w: f64, steps: usize, lr: f64, b1: f64, b2: f64, eps: f64) -> Vec<f64> {
        let (mut m, mut v) = (0.0, 0.0);
        let mut out = Vec::new();
        for k in 1..=steps {
            let g = 2.0 * (w - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(k as i32));
            let v_hat = v / (1.0 - b2.powi(k as i32));
            w -= lr * m_hat / (v_hat.sqrt() + eps);
            out.push(w);
        }
        out
    }

    #[test]
    fn adam_matches_reference_recurrence_on_quadratic() {
        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let expected = adam_oracle(-1.0, 10, lr, b1, b2, eps);
        let mut p = scalar_param(-1.0);
        for want in expected {
            p.grad[(0, 0)] = 2.0 * (p.value[(0, 0)] - 3.0);
            adam_step([&mut p], lr, b1, b2, eps).unwrap();
            assert!((p.value[(0, 0)] - want).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn zero_gradients_leave_parameters_bit_identical(
            values in prop::collection::vec(-10.0f64..10.0, 1..20),
            adam in any::<bool>(),
        ) {
            let n = values.len();
            let mut p = Param::new(Matrix::from_vec(1, n, values.clone()).unwrap());
            let opt = if adam { Optimizer::adam(1e-3) } else { Optimizer::default() };
            for _ in 0..3 {
                opt.step([&mut p]).unwrap();
            }
            for (a, b) in p.value.as_slice().iter().zip(&values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
