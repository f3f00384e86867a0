//! Source-only training of a closed-set `G → C` network.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PairedBatches, Pairing, Unlabeled};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Mode};
use crate::osbp::trainer::{apply_gradients, check_model_fits, source_gradients};
use crate::osbp::{Head, Model, TrainConfig};
use crate::scalar::Scalar;

/// Per-epoch means of a baseline's losses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub source_loss: f64,
    /// The alignment term (MMD or domain cross-entropy); zero for source-only training.
    pub alignment_loss: f64,
}

/// Shared epoch loop. `step` accumulates gradients for one `(source, target)` batch pair
/// and returns `(source_loss, alignment_loss)`; the update is applied here. Without a
/// target the target batch is an empty matrix.
pub(crate) fn run_baseline<T, F>(
    model: &mut Model<T>,
    source: &Dataset,
    target: Option<Unlabeled<'_>>,
    cfg: &TrainConfig,
    mut step: F,
) -> Result<Vec<BaselineStats>>
where
    T: Scalar,
    F: FnMut(&mut Model<T>, &Matrix<T>, &[usize], &Matrix<T>) -> Result<(f64, f64)>,
{
    cfg.validate()?;
    if model.head() != Head::Closed {
        return Err(Error::Usage("baselines need a closed-set head with K outputs".into()));
    }
    if source.is_empty() {
        return Err(Error::Validation("training needs a non-empty source set".into()));
    }
    check_model_fits(model, source, source.width())?;

    let target_len = target.map_or(0, |t| t.len());
    let mut plan = PairedBatches::new(
        source.len(),
        target_len,
        cfg.batch_size,
        cfg.seed,
        Pairing::SourceDrives,
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sum = BaselineStats::default();
        let mut count = 0usize;
        for (source_idx, target_idx) in plan.epoch(epoch as u64) {
            let xs = source.features::<T>(&source_idx);
            let ys = source.labels_at(&source_idx);
            let xt = match target {
                Some(t) => t.features::<T>(&target_idx),
                None => Matrix::zeros(0, source.width()),
            };
            model.set_mode(Mode::Train);
            let (s, a) = step(model, &xs, &ys, &xt)?;
            apply_gradients(model, cfg)?;
            if !model
                .generator
                .params()
                .chain(model.classifier.params())
                .all(|p| p.value.is_finite())
            {
                return Err(Error::Validation("parameters diverged to non-finite values".into()));
            }
            sum.source_loss += s;
            sum.alignment_loss += a;
            count += 1;
        }
        let n = count.max(1) as f64;
        history.push(BaselineStats {
            source_loss: sum.source_loss / n,
            alignment_loss: sum.alignment_loss / n,
        });
    }
    model.set_mode(Mode::Eval);
    Ok(history)
}

/// Minimizes source cross-entropy only. The model must have a closed-set head.
pub fn train_source_only<T: Scalar>(
    model: &mut Model<T>,
    source: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<BaselineStats>> {
    run_baseline(model, source, None, cfg, |model, xs, ys, _| {
        Ok((source_gradients(model, xs, ys)?, 0.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledExample;
    use crate::nn::Optimizer;
    use crate::osbp::Architecture;

    fn blobs() -> Dataset {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let centres = [[-3.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
        let examples = (0..90)
            .map(|i| {
                let c = centres[i % 3];
                let f = vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)];
                LabeledExample::new(f, i % 3)
            })
            .collect();
        Dataset::new("blobs", examples).unwrap()
    }

    fn arch() -> Architecture {
        Architecture {
            generator: vec![16, 16],
            ..Architecture::fully_connected(2)
        }
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            optimizer: Optimizer::SgdMomentum {
                lr: 1e-2,
                momentum: 0.9,
            },
            batch_size: 16,
            epochs,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = blobs();
        let mut model = Model::<f64>::closed_set(&arch(), 3, 1).unwrap();
        let history = train_source_only(&mut model, &data, &cfg(40)).unwrap();
        assert_eq!(history.len(), 40);
        let predicted = model.predict(&data.all_features()).unwrap();
        let correct = predicted.iter().zip(data.labels()).filter(|(p, l)| **p == *l).count();
        assert!(correct as f64 / data.len() as f64 >= 0.99, "{correct}/{}", data.len());
    }

    #[test]
    fn runs_are_reproducible() {
        let data = blobs();
        let mut a = Model::<f64>::closed_set(&arch(), 3, 1).unwrap();
        let mut b = a.clone();
        train_source_only(&mut a, &data, &cfg(3)).unwrap();
        train_source_only(&mut b, &data, &cfg(3)).unwrap();
        let x = data.all_features::<f64>();
        assert_eq!(a.classify(&x).unwrap(), b.classify(&x).unwrap());
    }

    #[test]
    fn zero_epochs_leaves_the_model_untouched() {
        let data = blobs();
        let mut model = Model::<f64>::closed_set(&arch(), 3, 1).unwrap();
        let before = model.clone();
        assert!(train_source_only(&mut model, &data, &cfg(0)).unwrap().is_empty());
        let x = data.all_features::<f64>();
        assert_eq!(model.classify(&x).unwrap(), before.classify(&x).unwrap());
    }

    #[test]
    fn open_set_head_is_rejected() {
        let mut model = Model::<f64>::open_set(&arch(), 3, 1).unwrap();
        assert!(matches!(
            train_source_only(&mut model, &blobs(), &cfg(1)),
            Err(Error::Usage(_))
        ));
    }
}
