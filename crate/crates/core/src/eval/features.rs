use std::path::Path;

use crate::data::{write_csv_features, Dataset, LabeledExample};
use crate::error::Result;
use crate::osbp::Model;
use crate::scalar::Scalar;

/// Writes `label,f1,...,fF`: the ground-truth label and the generator output of every
/// example, in dataset order.
pub fn dump_features<T: Scalar>(model: &Model<T>, dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let features = model.features(&dataset.all_features())?;
    let examples = features
        .iter_rows()
        .zip(dataset.labels())
        .map(|(row, label)| LabeledExample::new(row.iter().map(|v| v.to_f64_lossless()).collect(), label))
        .collect();
    let table = Dataset::with_width(dataset.name(), features.cols(), examples)?;
    write_csv_features(&table, path)
}
