//! Domain-adversarial alignment: a two-way domain classifier on generator features,
//! trained through a gradient-reversal layer so the generator learns to confuse it.

use serde::{Deserialize, Serialize};

use crate::baselines::source_only::{run_baseline, BaselineStats};
use crate::data::{Dataset, TrainingData, Unlabeled};
use crate::error::{Error, Result};
use crate::nn::{loss, LayerSpec, LayerStack, Mode};
use crate::osbp::model::argmax_rows;
use crate::osbp::{Model, TrainConfig};
use crate::scalar::Scalar;
use crate::seed;

/// Shape of the domain classifier: `reversal(w) → affine(F, hidden) → leaky_relu → affine(hidden, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainHeadSpec {
    pub hidden: usize,
    pub grl_weight: f64,
}

impl Default for DomainHeadSpec {
    fn default() -> Self {
        Self {
            hidden: 100,
            grl_weight: 1.0,
        }
    }
}

impl DomainHeadSpec {
    pub fn layers(&self, feature_width: usize) -> Vec<LayerSpec> {
        vec![
            LayerSpec::grad_reversal(self.grl_weight),
            LayerSpec::affine(feature_width, self.hidden),
            LayerSpec::leaky_relu(),
            LayerSpec::affine(self.hidden, 2),
        ]
    }
}

/// A closed-set model together with its domain classifier.
#[derive(Debug, Clone)]
pub struct DomainAdversarial<T> {
    pub model: Model<T>,
    pub domain_head: LayerStack<T>,
}

impl<T: Scalar> DomainAdversarial<T> {
    /// `feature_width` is the generator's output width.
    pub fn new(model: Model<T>, feature_width: usize, head: &DomainHeadSpec, seed: u64) -> Result<Self> {
        if head.hidden == 0 {
            return Err(Error::Config("domain head needs at least one hidden unit".into()));
        }
        let domain_head = LayerStack::new(&head.layers(feature_width), seed::derive(seed, "init/domain_head"))?;
        Ok(Self { model, domain_head })
    }
}

/// Source cross-entropy plus domain cross-entropy (source = 0, target = 1). The domain
/// head minimizes the domain loss; the reversal layer makes the generator maximize it.
pub fn train_bp<T: Scalar>(
    net: &mut DomainAdversarial<T>,
    data: TrainingData<'_>,
    cfg: &TrainConfig,
) -> Result<Vec<BaselineStats>> {
    data.validate()?;
    let head = &mut net.domain_head;
    head.set_mode(Mode::Train);
    let result = run_baseline(
        &mut net.model,
        data.source,
        Some(data.target),
        cfg,
        |model, xs, ys, xt| {
            let (fs, g_src) = model.generator.forward(xs)?;
            let (logits, c_trace) = model.classifier.forward(&fs)?;
            let (source_loss, logit_grad) = loss::cross_entropy_from_logits(&logits, ys)?;
            let mut fs_grad = model.classifier.backward(c_trace, &logit_grad)?;

            let (ft, g_tgt) = model.generator.forward_keep_stats(xt)?;
            let both = fs.vstack(&ft)?;
            let domains: Vec<usize> = (0..both.rows()).map(|i| usize::from(i >= fs.rows())).collect();
            let (domain_logits, h_trace) = head.forward(&both)?;
            let (domain_loss, domain_grad) = loss::cross_entropy_from_logits(&domain_logits, &domains)?;
            let feature_grad = head.backward(h_trace, &domain_grad)?;
            let (grad_s, grad_t) = feature_grad.split_rows(fs.rows());
            fs_grad.add_assign(&grad_s)?;
            model.generator.backward(g_src, &fs_grad)?;
            model.generator.backward(g_tgt, &grad_t)?;
            cfg.optimizer.step(head.params_mut())?;
            Ok((source_loss.to_f64_lossless(), domain_loss.to_f64_lossless()))
        },
    );
    net.domain_head.set_mode(Mode::Eval);
    result
}

/// Fraction of source and target samples whose domain the head predicts correctly.
pub fn domain_accuracy<T: Scalar>(net: &DomainAdversarial<T>, source: &Dataset, target: Unlabeled<'_>) -> Result<f64> {
    let all_s: Vec<usize> = (0..source.len()).collect();
    let all_t: Vec<usize> = (0..target.len()).collect();
    let fs = net.model.features(&source.features::<T>(&all_s))?;
    let ft = net.model.features(&target.features::<T>(&all_t))?;
    let ps = argmax_rows(&net.domain_head.predict(&fs)?);
    let pt = argmax_rows(&net.domain_head.predict(&ft)?);
    let correct = ps.iter().filter(|&&d| d == 0).count() + pt.iter().filter(|&&d| d == 1).count();
    let total = ps.len() + pt.len();
    if total == 0 {
        return Err(Error::Validation("domain accuracy needs at least one sample".into()));
    }
    Ok(correct as f64 / total as f64)
}
