//! Model checkpoints as versioned JSON. Every parameter is stored as an `f64` written in
//! shortest round-trip form, so saving and loading is exact for `f32` and `f64` models.
//! Optimizer slots and dropout RNG state are not saved.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Layer, LayerSpec, LayerStack, Matrix, Param};
use crate::osbp::model::{Head, Model};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "osbp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    known_classes: usize,
    head: Head,
    generator: Vec<LayerRecord>,
    classifier: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    spec: LayerSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tensors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    running_mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    running_var: Vec<f64>,
}

fn to_f64s<T: Scalar>(values: &[T]) -> Vec<f64> {
    values.iter().map(|v| v.to_f64_lossless()).collect()
}

fn record<T: Scalar>(layer: &Layer<T>) -> LayerRecord {
    let (running_mean, running_var) = match layer {
        Layer::BatchNorm {
            running_mean,
            running_var,
            ..
        } => (to_f64s(running_mean), to_f64s(running_var)),
        _ => (Vec::new(), Vec::new()),
    };
    LayerRecord {
        spec: layer.spec(),
        tensors: layer.params().iter().map(|p| to_f64s(p.value.as_slice())).collect(),
        running_mean,
        running_var,
    }
}

fn restore<T: Scalar>(stack_name: &str, index: usize, rec: &LayerRecord) -> Result<Layer<T>> {
    let mismatch = |what: &str| Error::Validation(format!("{stack_name} layer {index}: {what}"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut layer = Layer::<T>::from_spec(&rec.spec, &mut rng).map_err(|e| mismatch(&e.to_string()))?;
    let mut params = layer.params_mut();
    if params.len() != rec.tensors.len() {
        return Err(mismatch(&format!(
            "expected {} tensors, found {}",
            params.len(),
            rec.tensors.len()
        )));
    }
    for (param, values) in params.iter_mut().zip(&rec.tensors) {
        let (r, c) = param.value.shape();
        if values.len() != r * c {
            return Err(mismatch(&format!(
                "tensor has {} values, expected {}",
                values.len(),
                r * c
            )));
        }
        **param = Param::new(Matrix::from_vec(r, c, values.iter().map(|&v| T::lit(v)).collect())?);
    }
    if let Layer::BatchNorm {
        running_mean,
        running_var,
        ..
    } = &mut layer
    {
        if rec.running_mean.len() != running_mean.len() || rec.running_var.len() != running_var.len() {
            return Err(mismatch("running statistics have the wrong width"));
        }
        *running_mean = rec.running_mean.iter().map(|&v| T::lit(v)).collect();
        *running_var = rec.running_var.iter().map(|&v| T::lit(v)).collect();
    }
    Ok(layer)
}

fn restore_stack<T: Scalar>(name: &str, records: &[LayerRecord]) -> Result<LayerStack<T>> {
    let layers = records
        .iter()
        .enumerate()
        .map(|(i, r)| restore(name, i, r))
        .collect::<Result<Vec<_>>>()?;
    LayerStack::from_layers(layers)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        known_classes: model.known_classes(),
        head: model.head(),
        generator: model.generator.layers().iter().map(record).collect(),
        classifier: model.classifier.layers().iter().map(record).collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint {} v{}", file.format, file.version),
        ));
    }
    let generator = restore_stack("generator", &file.generator)?;
    let classifier = restore_stack("classifier", &file.classifier)?;
    Model::from_parts(generator, classifier, file.known_classes, file.head)
}

/// Checks that a loaded model has exactly the expected layers, naming the first mismatch.
pub fn check_architecture<T: Scalar>(
    model: &Model<T>,
    generator: &[LayerSpec],
    classifier: &[LayerSpec],
) -> Result<()> {
    for (name, stack, expected) in [
        ("generator", &model.generator, generator),
        ("classifier", &model.classifier, classifier),
    ] {
        let found = stack.specs();
        for i in 0..found.len().max(expected.len()) {
            if found.get(i) != expected.get(i) {
                let show = |s: Option<&LayerSpec>| s.map_or("nothing".to_string(), |s| format!("{s:?}"));
                return Err(Error::Validation(format!(
                    "architecture mismatch at {name} layer {i}: checkpoint has {}, config expects {}",
                    show(found.get(i)),
                    show(expected.get(i))
                )));
            }
        }
    }
    Ok(())
}
