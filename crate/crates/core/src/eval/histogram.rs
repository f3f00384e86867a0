//! Frequency of the unknown-class probability, split by ground truth.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::osbp::Model;
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 20;

/// Equal-width bins over `[0, 1]`; `1.0` falls in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PUnknownHistogram {
    pub bins: usize,
    /// Counts for samples whose true label is a known class.
    pub known: Vec<u64>,
    /// Counts for samples whose true label is `K`.
    pub unknown: Vec<u64>,
    pub mean_known: Option<f64>,
    pub mean_unknown: Option<f64>,
}

impl PUnknownHistogram {
    /// Mean probability on true unknowns minus mean on true knowns, when both exist.
    pub fn separation(&self) -> Option<f64> {
        Some(self.mean_unknown? - self.mean_known?)
    }
}

pub fn histogram_from_values(
    p_unknown: &[f64],
    truth: &[usize],
    known_classes: usize,
    bins: usize,
) -> Result<PUnknownHistogram> {
    if bins < 2 {
        return Err(Error::Config(format!("histogram needs at least 2 bins, got {bins}")));
    }
    if p_unknown.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} probabilities for {} labels",
            p_unknown.len(),
            truth.len()
        )));
    }
    let mut known = vec![0u64; bins];
    let mut unknown = vec![0u64; bins];
    let (mut sum_k, mut sum_u) = (0.0, 0.0);
    for (&p, &label) in p_unknown.iter().zip(truth) {
        let bin = ((p.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        if label >= known_classes {
            unknown[bin] += 1;
            sum_u += p;
        } else {
            known[bin] += 1;
            sum_k += p;
        }
    }
    let mean = |sum: f64, counts: &[u64]| {
        let n: u64 = counts.iter().sum();
        (n > 0).then(|| sum / n as f64)
    };
    Ok(PUnknownHistogram {
        bins,
        mean_known: mean(sum_k, &known),
        mean_unknown: mean(sum_u, &unknown),
        known,
        unknown,
    })
}

/// Histogram of `p(y = K | x)` for an open-set model over a labeled target set.
pub fn p_unknown_histogram<T: Scalar>(model: &Model<T>, target: &Dataset, bins: usize) -> Result<PUnknownHistogram> {
    let p: Vec<f64> = model
        .p_unknown(&target.all_features())?
        .into_iter()
        .map(|v| v.to_f64_lossless())
        .collect();
    histogram_from_values(&p, &target.labels(), model.known_classes(), bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_fill_the_first_bin() {
        let h = histogram_from_values(&[0.0; 5], &[0; 5], 2, 20).unwrap();
        assert_eq!(h.known[0], 5);
        assert_eq!(h.mean_unknown, None);
    }

    #[test]
    fn one_goes_to_the_last_bin() {
        let h = histogram_from_values(&[1.0, 0.999], &[2, 2], 2, 20).unwrap();
        assert_eq!(h.unknown[19], 2);
    }

    #[test]
    fn separation_of_means() {
        let h = histogram_from_values(&[0.1, 0.9], &[0, 1], 1, 10).unwrap();
        assert!((h.separation().unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn too_few_bins() {
        assert!(matches!(
            histogram_from_values(&[0.5], &[0], 1, 1),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn counts_sum_to_group_sizes(
            pairs in prop::collection::vec((0.0f64..=1.0, 0usize..4), 0..100),
            bins in 2usize..40,
        ) {
            let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let t: Vec<usize> = pairs.iter().map(|x| x.1).collect();
            let h = histogram_from_values(&p, &t, 3, bins).unwrap();
            let unknowns = t.iter().filter(|&&l| l == 3).count() as u64;
            prop_assert_eq!(h.unknown.iter().sum::<u64>(), unknowns);
            prop_assert_eq!(h.known.iter().sum::<u64>(), t.len() as u64 - unknowns);
        }
    }
}
