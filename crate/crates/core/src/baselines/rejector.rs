use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::osbp::model::argmax_rows;
use crate::scalar::Scalar;

/// Fixed, sample-independent rejection threshold on the largest known-class probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectorConfig {
    pub threshold: f64,
}

impl Default for RejectorConfig {
    fn default() -> Self {
        Self { threshold: 0.1 }
    }
}

impl RejectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must lie in [0,1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Labels each row of `K`-way probabilities: `K` (unknown) when the largest probability
/// is below the threshold, otherwise the arg-max with ties to the lowest index.
pub fn threshold_predict<T: Scalar>(probs: &Matrix<T>, cfg: &RejectorConfig) -> Vec<usize> {
    let unknown = probs.cols();
    let threshold = T::lit(cfg.threshold);
    argmax_rows(probs)
        .into_iter()
        .enumerate()
        .map(|(i, best)| if probs[(i, best)] < threshold { unknown } else { best })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn low_confidence_is_unknown() {
        let probs = Matrix::from_rows(&[
            vec![0.05; 20],
            vec![0.5, 0.3, 0.2].into_iter().chain(vec![0.0; 17]).collect(),
        ])
        .unwrap();
        assert_eq!(threshold_predict(&probs, &RejectorConfig::default()), vec![20, 0]);
    }

    #[test]
    fn zero_threshold_never_rejects() {
        let probs = Matrix::from_rows(&[[0.2, 0.3, 0.5], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        assert_eq!(
            threshold_predict(&probs, &RejectorConfig { threshold: 0.0 }),
            vec![2, 0]
        );
    }

    #[test]
    fn validation() {
        assert!(RejectorConfig { threshold: 1.0 }.validate().is_err());
        assert!(RejectorConfig { threshold: -0.1 }.validate().is_err());
        assert!(RejectorConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn degenerate_thresholds(k in 2usize..12, raw in prop::collection::vec(0.01f64..1.0, 12)) {
            let total: f64 = raw[..k].iter().sum();
            let row: Vec<f64> = raw[..k].iter().map(|v| v / total).collect();
            let probs = Matrix::from_rows(&[row]).unwrap();
            let none = RejectorConfig { threshold: 0.0 };
            prop_assert!(threshold_predict(&probs, &none)[0] < k);

            let uniform = Matrix::filled(1, k, 1.0 / k as f64);
            let near_one = RejectorConfig { threshold: 1.0 - 1e-9 };
            prop_assert_eq!(threshold_predict(&uniform, &near_one)[0], k);
        }
    }
}
