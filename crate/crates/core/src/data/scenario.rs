//! Known/unknown relabeling of a source/target pair.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::dataset::{Dataset, LabeledExample, TrainingData};
use crate::error::{Error, Result};
use crate::seed;

/// A source set with labels `0..K` and a target set with labels `0..=K`, where `K`
/// marks every unknown target sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSetScenario {
    source: Dataset,
    target: Dataset,
    known_labels: Vec<usize>,
}

impl OpenSetScenario {
    /// Wraps already relabeled data. `known_labels[i]` is the original label of class `i`.
    pub fn new(source: Dataset, target: Dataset, known_labels: Vec<usize>) -> Result<Self> {
        let k = known_labels.len();
        if k == 0 {
            return Err(Error::Validation("a scenario needs at least one known class".into()));
        }
        if let Some(bad) = source.examples().iter().find(|e| e.label >= k) {
            return Err(Error::Validation(format!(
                "source label {} is not a known class (K = {k})",
                bad.label
            )));
        }
        if let Some(bad) = target.examples().iter().find(|e| e.label > k) {
            return Err(Error::Validation(format!("target label {} exceeds K = {k}", bad.label)));
        }
        if !source.is_empty() && !target.is_empty() && source.width() != target.width() {
            return Err(Error::Validation(format!(
                "source width {} differs from target width {}",
                source.width(),
                target.width()
            )));
        }
        Ok(Self {
            source,
            target,
            known_labels,
        })
    }

    pub fn source(&self) -> &Dataset {
        &self.source
    }

    /// Target with ground truth; meant for evaluation only.
    pub fn target(&self) -> &Dataset {
        &self.target
    }

    pub fn known_classes(&self) -> usize {
        self.known_labels.len()
    }

    /// Index of the unknown class (`K`).
    pub fn unknown_label(&self) -> usize {
        self.known_labels.len()
    }

    pub fn known_labels(&self) -> &[usize] {
        &self.known_labels
    }

    pub fn width(&self) -> usize {
        self.source.width()
    }

    /// Original label of a known class index, `None` for the unknown class.
    pub fn original_label(&self, class: usize) -> Option<usize> {
        self.known_labels.get(class).copied()
    }

    pub fn training_data(&self) -> TrainingData<'_> {
        TrainingData {
            source: &self.source,
            target: self.target.unlabeled(),
        }
    }

    pub fn unknown_fraction(&self) -> f64 {
        let k = self.unknown_label();
        let unknown = self.target.examples().iter().filter(|e| e.label == k).count();
        unknown as f64 / self.target.len().max(1) as f64
    }
}

/// Builds an open-set scenario from raw labeled data.
///
/// Known labels are renumbered `0..K` in ascending original order; the source keeps only
/// known classes; target labels outside `known` become `K`. When `unknown_ratio` is given
/// the target is subsampled without replacement (seeded) so that
/// `unknown / total` matches it to within one example: unknown samples are dropped when
/// there are too many, known samples when there are too few.
pub fn make_scenario(
    source: &Dataset,
    target: &Dataset,
    known: &BTreeSet<usize>,
    seed: u64,
    unknown_ratio: Option<f64>,
) -> Result<OpenSetScenario> {
    if known.is_empty() {
        return Err(Error::Validation("the known label set is empty".into()));
    }
    let present: BTreeSet<usize> = source.labels().into_iter().collect();
    if let Some(missing) = known.iter().find(|l| !present.contains(l)) {
        return Err(Error::Validation(format!(
            "known label {missing} does not occur in the source"
        )));
    }
    let known_labels: Vec<usize> = known.iter().copied().collect();
    let k = known_labels.len();
    let remap = |label: usize| known_labels.binary_search(&label).unwrap_or(k);

    let source_examples = source
        .examples()
        .iter()
        .filter(|e| known.contains(&e.label))
        .map(|e| LabeledExample::new(e.features.clone(), remap(e.label)))
        .collect();
    let mut target_examples: Vec<LabeledExample> = target
        .examples()
        .iter()
        .map(|e| LabeledExample::new(e.features.clone(), remap(e.label)))
        .collect();

    if let Some(ratio) = unknown_ratio {
        target_examples = subsample_to_ratio(target_examples, k, ratio, seed)?;
    }

    OpenSetScenario::new(
        Dataset::with_width(source.name(), source.width(), source_examples)?,
        Dataset::with_width(target.name(), target.width(), target_examples)?,
        known_labels,
    )
}

fn subsample_to_ratio(examples: Vec<LabeledExample>, k: usize, ratio: f64, seed: u64) -> Result<Vec<LabeledExample>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Validation(format!(
            "unknown_ratio must lie in [0,1), got {ratio}"
        )));
    }
    let (unknown, known): (Vec<usize>, Vec<usize>) = (0..examples.len()).partition(|&i| examples[i].label == k);
    let (n_known, n_unknown) = (known.len(), unknown.len());
    let wanted_unknown = (ratio * n_known as f64 / (1.0 - ratio)).round() as usize;
    let (keep_known, keep_unknown) = if wanted_unknown <= n_unknown {
        (n_known, wanted_unknown)
    } else {
        let wanted_known = (n_unknown as f64 * (1.0 - ratio) / ratio).round() as usize;
        (wanted_known.min(n_known), n_unknown)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "unknown_ratio"));
    let pick = |pool: &[usize], amount: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        sample(rng, pool.len(), amount).into_iter().map(|i| pool[i]).collect()
    };
    let mut keep: Vec<usize> = pick(&known, keep_known, &mut rng);
    keep.extend(pick(&unknown, keep_unknown, &mut rng));
    keep.sort_unstable();

    let mut slots: Vec<Option<LabeledExample>> = examples.into_iter().map(Some).collect();
    Ok(keep.into_iter().filter_map(|i| slots[i].take()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labeled(labels: &[usize]) -> Dataset {
        Dataset::new(
            "d",
            labels
                .iter()
                .enumerate()
                .map(|(i, &y)| LabeledExample::new(vec![i as f64], y))
                .collect(),
        )
        .unwrap()
    }

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn digits_protocol_maps_unknown_to_k() {
        let digits: Vec<usize> = (0..10).collect();
        let sc = make_scenario(&labeled(&digits), &labeled(&digits), &set(&[0, 1, 2, 3, 4]), 0, None).unwrap();
        assert_eq!(sc.known_classes(), 5);
        assert_eq!(sc.source().labels(), vec![0, 1, 2, 3, 4]);
        assert_eq!(sc.target().examples()[7].label, 5);
        assert_eq!(sc.target().labels(), vec![0, 1, 2, 3, 4, 5, 5, 5, 5, 5]);
    }

    #[test]
    fn known_labels_remap_in_sorted_order() {
        let sc = make_scenario(&labeled(&[5, 3, 5]), &labeled(&[3, 5, 9]), &set(&[5, 3]), 0, None).unwrap();
        assert_eq!(sc.source().labels(), vec![1, 0, 1]);
        assert_eq!(sc.target().labels(), vec![0, 1, 2]);
        assert_eq!(sc.original_label(0), Some(3));
        assert_eq!(sc.original_label(1), Some(5));
        assert_eq!(sc.original_label(2), None);
    }

    #[test]
    fn known_label_absent_from_source() {
        let err = make_scenario(&labeled(&[0, 1]), &labeled(&[0]), &set(&[0, 2]), 0, None).unwrap_err();
        assert!(err.to_string().contains("known label 2"), "{err}");
        assert!(make_scenario(&labeled(&[0]), &labeled(&[0]), &set(&[]), 0, None).is_err());
    }

    #[test]
    fn ratio_half_drops_unknowns() {
        let mut target = vec![0; 100];
        target.extend(vec![1; 300]);
        let sc = make_scenario(&labeled(&[0]), &labeled(&target), &set(&[0]), 3, Some(0.5)).unwrap();
        let unknown = sc.target().labels().iter().filter(|&&y| y == 1).count();
        assert_eq!(sc.target().len() - unknown, 100);
        assert_eq!(unknown, 100);
    }

    #[test]
    fn ratio_above_available_drops_knowns() {
        let mut target = vec![0; 150];
        target.extend(vec![1; 100]);
        let sc = make_scenario(&labeled(&[0]), &labeled(&target), &set(&[0]), 3, Some(0.8)).unwrap();
        let unknown = sc.target().labels().iter().filter(|&&y| y == 1).count();
        assert_eq!(unknown, 100);
        assert_eq!(sc.target().len() - unknown, 25);
        assert!(make_scenario(&labeled(&[0]), &labeled(&target), &set(&[0]), 3, Some(1.0)).is_err());
    }

    #[test]
    fn ratio_subsampling_is_seeded() {
        let target: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let a = make_scenario(&labeled(&[0, 1]), &labeled(&target), &set(&[0, 1]), 9, Some(0.3)).unwrap();
        let b = make_scenario(&labeled(&[0, 1]), &labeled(&target), &set(&[0, 1]), 9, Some(0.3)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn relabeling_is_invertible_and_source_never_sees_k(
            source in prop::collection::vec(0usize..8, 1..60),
            target in prop::collection::vec(0usize..12, 1..60),
            ratio in prop::option::of(0.05f64..0.95),
            seed: u64,
        ) {
            let known: BTreeSet<usize> = source.iter().copied().filter(|y| y % 2 == 0).collect();
            prop_assume!(!known.is_empty());
            let (src, tgt) = (labeled(&source), labeled(&target));
            let sc = make_scenario(&src, &tgt, &known, seed, ratio).unwrap();
            let k = sc.known_classes();
            prop_assert!(sc.source().labels().iter().all(|&y| y < k));
            // Features encode the original index, so each relabeled example can be traced back.
            for e in sc.source().examples().iter().chain(sc.target().examples()) {
                let i = e.features[0] as usize;
                let is_source = sc.source().examples().contains(e);
                let original = if is_source { source[i] } else { target[i] };
                match sc.original_label(e.label) {
                    Some(orig) => prop_assert_eq!(orig, original),
                    None => prop_assert!(!known.contains(&original)),
                }
            }
            if let Some(r) = ratio {
                let n = sc.target().len() as f64;
                let unknown = sc.unknown_fraction() * n;
                let n_unknown_avail = target.iter().filter(|y| !known.contains(y)).count();
                let n_known_avail = target.len() - n_unknown_avail;
                if n_unknown_avail > 0 && n_known_avail > 0 && n >= 1.0 {
                    // Within one example of the requested ratio.
                    prop_assert!((unknown - r * n).abs() <= 1.0 + 1e-9 || sc.target().len() <= 2);
                }
            }
        }
    }
}
