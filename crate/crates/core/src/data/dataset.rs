use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// An immutable collection of equally wide labeled feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    width: usize,
    examples: Vec<LabeledExample>,
}

impl Dataset {
    /// Width is taken from the first example; every other example must match.
    pub fn new(name: impl Into<String>, examples: Vec<LabeledExample>) -> Result<Self> {
        let width = examples.first().map_or(0, |e| e.features.len());
        Self::with_width(name, width, examples)
    }

    pub fn with_width(name: impl Into<String>, width: usize, examples: Vec<LabeledExample>) -> Result<Self> {
        if let Some((i, e)) = examples.iter().enumerate().find(|(_, e)| e.features.len() != width) {
            return Err(Error::Validation(format!(
                "example {i} has width {}, dataset width is {width}",
                e.features.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            width,
            examples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn labels_at(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.examples[i].label).collect()
    }

    pub fn features<T: Scalar>(&self, indices: &[usize]) -> Matrix<T> {
        let data = indices
            .iter()
            .flat_map(|&i| self.examples[i].features.iter().map(|&v| T::lit(v)))
            .collect();
        Matrix::from_vec(indices.len(), self.width, data).expect("uniform width")
    }

    pub fn all_features<T: Scalar>(&self) -> Matrix<T> {
        self.features(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn unlabeled(&self) -> Unlabeled<'_> {
        Unlabeled { dataset: self }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// A dataset with its labels hidden. Trainers only ever see targets through this view.
#[derive(Debug, Clone, Copy)]
pub struct Unlabeled<'a> {
    dataset: &'a Dataset,
}

impl Unlabeled<'_> {
    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn width(&self) -> usize {
        self.dataset.width()
    }

    pub fn features<T: Scalar>(&self, indices: &[usize]) -> Matrix<T> {
        self.dataset.features(indices)
    }
}

/// What a trainer receives: labeled source, unlabeled target.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub source: &'a Dataset,
    pub target: Unlabeled<'a>,
}

impl TrainingData<'_> {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(Error::Validation(
                "training needs non-empty source and target sets".into(),
            ));
        }
        if self.source.width() != self.target.width() {
            return Err(Error::Validation(format!(
                "source width {} differs from target width {}",
                self.source.width(),
                self.target.width()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_examples_are_rejected() {
        let ex = vec![
            LabeledExample::new(vec![1.0, 2.0], 0),
            LabeledExample::new(vec![1.0], 1),
        ];
        assert!(matches!(Dataset::new("x", ex), Err(Error::Validation(_))));
    }

    #[test]
    fn feature_matrix_follows_indices() {
        let ds = Dataset::new(
            "x",
            vec![
                LabeledExample::new(vec![1.0, 2.0], 0),
                LabeledExample::new(vec![3.0, 4.0], 5),
            ],
        )
        .unwrap();
        let m = ds.features::<f64>(&[1, 0]);
        assert_eq!(m.as_slice(), &[3.0, 4.0, 1.0, 2.0]);
        assert_eq!(ds.labels_at(&[1]), vec![5]);
        assert_eq!(ds.unlabeled().features::<f32>(&[0]).as_slice(), &[1.0f32, 2.0]);
    }
}
