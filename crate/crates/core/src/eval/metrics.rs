//! OS, OS*, ALL and UNK.
//!
//! Per-class accuracy is `correct / support` for each true class. OS is the mean over all
//! `K + 1` classes present in the evaluation set, OS* the mean over the known classes
//! present, UNK the accuracy on class `K`, ALL the fraction of all samples classified
//! correctly. Classes with no samples are left out of every average.

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::confusion::ConfusionMatrix;
use crate::eval::histogram::{p_unknown_histogram, PUnknownHistogram, DEFAULT_BINS};
use crate::nn::Matrix;
use crate::osbp::Model;
use crate::scalar::Scalar;

/// Accuracies in any number type; exact with rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct Accuracies<R> {
    /// `None` for classes absent from the evaluation set.
    pub per_class: Vec<Option<R>>,
    pub os: R,
    pub os_star: Option<R>,
    pub unk: Option<R>,
    pub all: R,
}

pub fn accuracies<R: Num + FromPrimitive + Clone>(confusion: &ConfusionMatrix) -> Result<Accuracies<R>> {
    let classes = confusion.classes();
    let total = confusion.total();
    if classes < 2 || total == 0 {
        return Err(Error::Validation(
            "evaluation needs at least one sample and two classes".into(),
        ));
    }
    let from = |v: u64| R::from_u64(v).ok_or_else(|| Error::Validation(format!("count {v} is not representable")));
    let per_class = (0..classes)
        .map(|c| match confusion.support(c) {
            0 => Ok(None),
            s => Ok(Some(from(confusion.get(c, c))? / from(s)?)),
        })
        .collect::<Result<Vec<_>>>()?;

    let mean = |values: &[Option<R>]| -> Result<Option<R>> {
        let present: Vec<&R> = values.iter().flatten().collect();
        if present.is_empty() {
            return Ok(None);
        }
        let sum = present.iter().fold(R::zero(), |acc, v| acc + (*v).clone());
        Ok(Some(sum / from(present.len() as u64)?))
    };
    let known = classes - 1;
    let os = mean(&per_class)?.expect("at least one class has samples");
    let os_star = mean(&per_class[..known])?;
    Ok(Accuracies {
        unk: per_class[known].clone(),
        os,
        os_star,
        all: from(confusion.trace())? / from(total)?,
        per_class,
    })
}

/// The evaluation of one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub known_classes: usize,
    pub n: u64,
    /// `K + 1` entries; `None` where the class has no samples.
    pub per_class_acc: Vec<Option<f64>>,
    #[serde(rename = "OS")]
    pub os: f64,
    #[serde(rename = "OS_star")]
    pub os_star: Option<f64>,
    #[serde(rename = "ALL")]
    pub all: f64,
    #[serde(rename = "UNK")]
    pub unk: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub histogram: Option<PUnknownHistogram>,
}

/// Scores predictions in `0..=K` against ground truth in `0..=K`.
pub fn evaluate_predictions(truth: &[usize], predicted: &[usize], known_classes: usize) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty target set".into()));
    }
    let confusion = ConfusionMatrix::from_predictions(truth, predicted, known_classes + 1)?;
    let acc = accuracies::<f64>(&confusion)?;
    Ok(EvalReport {
        known_classes,
        n: confusion.total(),
        per_class_acc: acc.per_class,
        os: acc.os,
        os_star: acc.os_star,
        all: acc.all,
        unk: acc.unk,
        confusion,
        histogram: None,
    })
}

/// Runs `predict` over the whole labeled target and scores it.
pub fn evaluate<T, F>(mut predict: F, target: &Dataset, known_classes: usize) -> Result<EvalReport>
where
    T: Scalar,
    F: FnMut(&Matrix<T>) -> Result<Vec<usize>>,
{
    if target.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty target set".into()));
    }
    let truth = target.labels();
    if let Some(bad) = truth.iter().find(|&&l| l > known_classes) {
        return Err(Error::Validation(format!(
            "target label {bad} is above K = {known_classes}"
        )));
    }
    let predicted = predict(&target.all_features())?;
    evaluate_predictions(&truth, &predicted, known_classes)
}

/// Scores a model's own predictions; open-set models also get the unknown-probability
/// histogram.
pub fn evaluate_model<T: Scalar>(model: &Model<T>, target: &Dataset) -> Result<EvalReport> {
    let mut report = evaluate(|x| model.predict(x), target, model.known_classes())?;
    if model.unknown_column().is_some() {
        report.histogram = Some(p_unknown_histogram(model, target, DEFAULT_BINS)?);
    }
    Ok(report)
}
