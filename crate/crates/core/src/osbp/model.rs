use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{loss, LayerSpec, LayerStack, Matrix, Mode};
use crate::scalar::Scalar;
use crate::seed;

/// Layer widths and options for a fully-connected generator/classifier pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    /// Generator widths after the input, e.g. `[100, 100]`.
    pub generator: Vec<usize>,
    /// Hidden widths of the classifier before its output layer; usually empty.
    pub classifier_hidden: Vec<usize>,
    pub batch_norm: bool,
    pub leaky_slope: f64,
    /// Dropout rate inserted after every hidden activation, if any.
    pub dropout: Option<f64>,
}

impl Architecture {
    /// `G = [input → 100 → 100]`, `C = [100 → outputs]`, batch norm and leaky ReLU after each
    /// hidden affine layer.
    pub fn fully_connected(input: usize) -> Self {
        Self {
            input,
            generator: vec![100, 100],
            classifier_hidden: Vec::new(),
            batch_norm: true,
            leaky_slope: crate::nn::layer::DEFAULT_LEAKY_SLOPE,
            dropout: None,
        }
    }

    fn hidden_block(&self, from: usize, to: usize, specs: &mut Vec<LayerSpec>) {
        specs.push(LayerSpec::affine(from, to));
        if self.batch_norm {
            specs.push(LayerSpec::batch_norm(to));
        }
        specs.push(LayerSpec::LeakyRelu {
            slope: self.leaky_slope,
        });
        if let Some(rate) = self.dropout {
            specs.push(LayerSpec::Dropout { rate });
        }
    }

    pub fn feature_width(&self) -> usize {
        self.generator.last().copied().unwrap_or(self.input)
    }

    pub fn generator_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut from = self.input;
        for &to in &self.generator {
            self.hidden_block(from, to, &mut specs);
            from = to;
        }
        specs
    }

    pub fn classifier_specs(&self, outputs: usize) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut from = self.feature_width();
        for &to in &self.classifier_hidden {
            self.hidden_block(from, to, &mut specs);
            from = to;
        }
        specs.push(LayerSpec::affine(from, outputs));
        specs
    }
}

/// Whether the classifier carries an extra unknown column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// `K+1` outputs; column `K` is the unknown class.
    OpenSet,
    /// `K` outputs, used by the baselines.
    Closed,
}

impl Head {
    pub fn outputs(self, known_classes: usize) -> usize {
        match self {
            Head::OpenSet => known_classes + 1,
            Head::Closed => known_classes,
        }
    }
}

/// Generator followed by classifier.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub generator: LayerStack<T>,
    pub classifier: LayerStack<T>,
    known_classes: usize,
    head: Head,
}

impl<T: Scalar> Model<T> {
    pub fn new(arch: &Architecture, known_classes: usize, head: Head, seed: u64) -> Result<Self> {
        if known_classes == 0 {
            return Err(Error::Config("at least one known class is required".into()));
        }
        let generator = LayerStack::new(&arch.generator_specs(), seed::derive(seed, "init/generator"))?;
        let classifier = LayerStack::new(
            &arch.classifier_specs(head.outputs(known_classes)),
            seed::derive(seed, "init/classifier"),
        )?;
        Self::from_parts(generator, classifier, known_classes, head)
    }

    /// `K+1`-way model for the adversarial method.
    pub fn open_set(arch: &Architecture, known_classes: usize, seed: u64) -> Result<Self> {
        Self::new(arch, known_classes, Head::OpenSet, seed)
    }

    /// `K`-way model for the baselines.
    pub fn closed_set(arch: &Architecture, known_classes: usize, seed: u64) -> Result<Self> {
        Self::new(arch, known_classes, Head::Closed, seed)
    }

    pub fn from_parts(
        generator: LayerStack<T>,
        classifier: LayerStack<T>,
        known_classes: usize,
        head: Head,
    ) -> Result<Self> {
        let outputs = head.outputs(known_classes);
        let feature_width = generator.output_width(generator.input_width().unwrap_or(0));
        if let Some(w) = classifier.input_width() {
            if generator.input_width().is_some() && w != feature_width {
                return Err(Error::shape(format!(
                    "generator yields width {feature_width}, classifier expects {w}"
                )));
            }
        }
        let classifier_out = classifier.output_width(classifier.input_width().unwrap_or(feature_width));
        if classifier_out != outputs {
            return Err(Error::shape(format!(
                "classifier has {classifier_out} outputs, {head:?} head with K = {known_classes} needs {outputs}"
            )));
        }
        Ok(Self {
            generator,
            classifier,
            known_classes,
            head,
        })
    }

    pub fn known_classes(&self) -> usize {
        self.known_classes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs(self.known_classes)
    }

    /// Column holding the unknown probability (`K`), for open-set heads.
    pub fn unknown_column(&self) -> Option<usize> {
        (self.head == Head::OpenSet).then_some(self.known_classes)
    }

    pub fn input_width(&self) -> Option<usize> {
        self.generator.input_width()
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.generator.set_mode(mode);
        self.classifier.set_mode(mode);
    }

    pub fn num_params(&self) -> usize {
        self.generator.num_params() + self.classifier.num_params()
    }

    /// Generator output in inference mode.
    pub fn features(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.generator.predict(batch)
    }

    /// Class probabilities in inference mode; rows sum to one.
    pub fn classify(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        let logits = self.classifier.predict(&self.generator.predict(batch)?)?;
        loss::softmax(&logits)
    }

    /// Arg-max labels. For open-set heads label `K` means unknown.
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.classify(batch)?))
    }

    /// Probability of the unknown class for each row.
    pub fn p_unknown(&self, batch: &Matrix<T>) -> Result<Vec<T>> {
        let column = self
            .unknown_column()
            .ok_or_else(|| Error::Usage("closed-set model has no unknown column".into()))?;
        Ok(self.classify(batch)?.column(column))
    }
}

/// Row-wise arg-max with ties going to the lowest index.
pub fn argmax_rows<T: Scalar>(probs: &Matrix<T>) -> Vec<usize> {
    probs
        .iter_rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, T::neg_infinity()),
                    |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                )
                .0
        })
        .collect()
}
