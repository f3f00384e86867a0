use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PairedBatches, Pairing, TrainingData};
use crate::error::{Error, Result};
use crate::nn::loss;
use crate::nn::{LayerSpec, LayerStack, Matrix, Mode, Optimizer};
use crate::osbp::model::{Head, Model};
use crate::scalar::Scalar;

/// Hyperparameters shared by the adversarial trainer and the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Target unknown probability the classifier is pulled toward; in `(0, 1)`.
    pub t: f64,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Scale of the reversed gradient reaching the generator.
    pub grl_weight: f64,
    #[serde(default)]
    pub freeze: Freeze,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            t: 0.5,
            optimizer: Optimizer::default(),
            batch_size: 32,
            epochs: 500,
            seed: 0,
            grl_weight: 1.0,
            freeze: Freeze::Nothing,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::Config(format!("t must lie in (0,1), got {}", self.t)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.grl_weight >= 0.0 && self.grl_weight.is_finite()) {
            return Err(Error::Config(format!(
                "grl_weight must be >= 0, got {}",
                self.grl_weight
            )));
        }
        self.optimizer.validate()
    }
}

/// Holds part of the model fixed: its gradients are computed and then discarded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Freeze {
    #[default]
    Nothing,
    Generator,
    Classifier,
}

/// Losses of one step, or their means over an epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Source cross-entropy.
    pub source_loss: f64,
    /// Adversarial binary cross-entropy on the target batch.
    pub adv_loss: f64,
    /// Mean target probability of the unknown class.
    pub mean_p_unknown: f64,
}

impl StepStats {
    pub(crate) fn mean(steps: &[StepStats]) -> StepStats {
        let n = steps.len().max(1) as f64;
        let sum = steps.iter().fold(StepStats::default(), |acc, s| StepStats {
            source_loss: acc.source_loss + s.source_loss,
            adv_loss: acc.adv_loss + s.adv_loss,
            mean_p_unknown: acc.mean_p_unknown + s.mean_p_unknown,
        });
        StepStats {
            source_loss: sum.source_loss / n,
            adv_loss: sum.adv_loss / n,
            mean_p_unknown: sum.mean_p_unknown / n,
        }
    }
}

/// Reported to the progress sink after every epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochProgress {
    pub epoch: usize,
    pub epochs: usize,
    pub stats: StepStats,
}

/// Source cross-entropy through `G → C`, back-propagated into both. Returns the loss.
pub(crate) fn source_gradients<T: Scalar>(model: &mut Model<T>, x: &Matrix<T>, labels: &[usize]) -> Result<f64> {
    let (features, g_trace) = model.generator.forward(x)?;
    let (logits, c_trace) = model.classifier.forward(&features)?;
    let (loss, logit_grad) = loss::cross_entropy_from_logits(&logits, labels)?;
    let feature_grad = model.classifier.backward(c_trace, &logit_grad)?;
    model.generator.backward(g_trace, &feature_grad)?;
    Ok(loss.to_f64_lossless())
}

/// Accumulates the gradients of one adversarial step without updating parameters.
///
/// The source batch goes through `G → C` and its cross-entropy gradient reaches both
/// networks. The target batch goes through `G → reversal → C`; the adversarial loss on
/// the unknown column is minimized by `C` and, through the reversal layer, maximized by
/// `G`.
pub fn osbp_gradients<T: Scalar>(
    model: &mut Model<T>,
    source_x: &Matrix<T>,
    source_labels: &[usize],
    target_x: &Matrix<T>,
    cfg: &TrainConfig,
) -> Result<StepStats> {
    cfg.validate()?;
    if model.unknown_column().is_none() {
        return Err(Error::Usage("the adversarial trainer needs an open-set head".into()));
    }
    if source_x.rows() == 0 || target_x.rows() == 0 {
        return Err(Error::Validation("empty minibatch".into()));
    }
    model.set_mode(Mode::Train);
    let source_loss = source_gradients(model, source_x, source_labels)?;
    let (adv_loss, mean_p_unknown) = adversarial_gradients(model, target_x, cfg)?;
    Ok(StepStats {
        source_loss,
        adv_loss,
        mean_p_unknown,
    })
}

/// The target half of [`osbp_gradients`]: accumulates the adversarial-loss gradients
/// (reversed for `G`) and returns the loss and the mean unknown probability.
pub fn adversarial_gradients<T: Scalar>(
    model: &mut Model<T>,
    target_x: &Matrix<T>,
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    let unknown = model
        .unknown_column()
        .ok_or_else(|| Error::Usage("the adversarial trainer needs an open-set head".into()))?;
    if target_x.rows() == 0 {
        return Err(Error::Validation("empty minibatch".into()));
    }
    model.set_mode(Mode::Train);
    let mut reversal = LayerStack::<T>::new(&[LayerSpec::grad_reversal(cfg.grl_weight)], 0)?;
    let (features, g_trace) = model.generator.forward(target_x)?;
    let (reversed, r_trace) = reversal.forward(&features)?;
    let (logits, c_trace) = model.classifier.forward(&reversed)?;
    let (adv_loss, logit_grad, p_unknown) = loss::adv_bce_from_logits(&logits, unknown, cfg.t)?;
    let reversed_grad = model.classifier.backward(c_trace, &logit_grad)?;
    let feature_grad = reversal.backward(r_trace, &reversed_grad)?;
    model.generator.backward(g_trace, &feature_grad)?;

    let mean_p = p_unknown.iter().map(|p| p.to_f64_lossless()).sum::<f64>() / p_unknown.len() as f64;
    Ok((adv_loss.to_f64_lossless(), mean_p))
}

/// Applies accumulated gradients to both networks at once, honoring `freeze`.
pub fn apply_gradients<T: Scalar>(model: &mut Model<T>, cfg: &TrainConfig) -> Result<()> {
    match cfg.freeze {
        Freeze::Generator => model.generator.zero_grads(),
        _ => cfg.optimizer.step(model.generator.params_mut())?,
    }
    match cfg.freeze {
        Freeze::Classifier => model.classifier.zero_grads(),
        _ => cfg.optimizer.step(model.classifier.params_mut())?,
    }
    Ok(())
}

/// One minibatch iteration: gradients of both paths, then one simultaneous update.
pub fn osbp_step<T: Scalar>(
    model: &mut Model<T>,
    source_x: &Matrix<T>,
    source_labels: &[usize],
    target_x: &Matrix<T>,
    cfg: &TrainConfig,
) -> Result<StepStats> {
    let stats = osbp_gradients(model, source_x, source_labels, target_x, cfg)?;
    apply_gradients(model, cfg)?;
    if !model
        .generator
        .params()
        .chain(model.classifier.params())
        .all(|p| p.value.is_finite())
    {
        return Err(Error::Validation("parameters diverged to non-finite values".into()));
    }
    Ok(stats)
}

pub(crate) fn check_model_fits(model: &Model<impl Scalar>, source: &Dataset, width: usize) -> Result<()> {
    if let Some(w) = model.input_width() {
        if w != width {
            return Err(Error::Shape {
                layer: Some(0),
                message: format!("model expects width {w}, data has width {width}"),
            });
        }
    }
    let k = model.known_classes();
    if let Some(bad) = source.examples().iter().find(|e| e.label >= k) {
        return Err(Error::Validation(format!(
            "source label {} is not below K = {k}",
            bad.label
        )));
    }
    Ok(())
}

/// Trains for `cfg.epochs` epochs. An epoch runs `ceil(max(|source|, |target|) / m)`
/// iterations; the smaller domain cycles with reshuffling. Returns per-epoch means.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    data: TrainingData<'_>,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&EpochProgress),
) -> Result<Vec<StepStats>> {
    cfg.validate()?;
    data.validate()?;
    if model.head() != Head::OpenSet {
        return Err(Error::Usage("the adversarial trainer needs an open-set head".into()));
    }
    check_model_fits(model, data.source, data.target.width())?;

    let mut plan = PairedBatches::new(
        data.source.len(),
        data.target.len(),
        cfg.batch_size,
        cfg.seed,
        Pairing::LargerDrives,
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut steps = Vec::with_capacity(plan.iterations_per_epoch());
        for (source_idx, target_idx) in plan.epoch(epoch as u64) {
            let xs = data.source.features::<T>(&source_idx);
            let ys = data.source.labels_at(&source_idx);
            let xt = data.target.features::<T>(&target_idx);
            steps.push(osbp_step(model, &xs, &ys, &xt, cfg)?);
        }
        let stats = StepStats::mean(&steps);
        sink(&EpochProgress {
            epoch,
            epochs: cfg.epochs,
            stats,
        });
        history.push(stats);
    }
    model.set_mode(Mode::Eval);
    Ok(history)
}
