//! `label,f1,...,fN` feature tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::dataset::{Dataset, LabeledExample};
use crate::error::{Error, Result};

/// Reads a feature table. A first line whose label field is not a number is treated as a
/// header and skipped. All rows must have the same number of fields.
pub fn load_csv_features(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut examples = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        let mut fields = record.iter();
        let Some(first) = fields.next().filter(|f| !f.is_empty()) else {
            continue;
        };
        if i == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        let label: usize = first
            .parse()
            .map_err(|_| Error::format(path, format!("line {line}: bad label {first:?}")))?;
        let features = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(path, format!("line {line}: bad feature value {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(features.len()),
            Some(w) if w != features.len() => {
                return Err(Error::format(
                    path,
                    format!("line {line}: expected {w} features, found {}", features.len()),
                ))
            }
            _ => {}
        }
        examples.push(LabeledExample::new(features, label));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::with_width(name, width.unwrap_or(0), examples)
}

/// Writes a header line and one `label,f1,...` row per example. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_csv_features(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(out, "label").map_err(io)?;
    for j in 1..=dataset.width() {
        write!(out, ",f{j}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for ex in dataset.examples() {
        write!(out, "{}", ex.label).map_err(io)?;
        for v in &ex.features {
            write!(out, ",{v:?}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn load_str(text: &str) -> Result<Dataset> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, text).unwrap();
        load_csv_features(&path)
    }

    #[test]
    fn single_row() {
        let ds = load_str("1,0.5,0.25\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.width(), 2);
        assert_eq!(ds.examples()[0], LabeledExample::new(vec![0.5, 0.25], 1));
    }

    #[test]
    fn ragged_row_names_line() {
        let err = load_str("1,0.5,0.25\n0,1.0\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn header_is_skipped() {
        let ds = load_str("label,f1,f2\n2,1,2\n0,3,4\n").unwrap();
        assert_eq!(ds.labels(), vec![2, 0]);
        assert_eq!(ds.width(), 2);
    }

    #[test]
    fn bad_values_are_format_errors() {
        assert!(matches!(load_str("1,abc\n"), Err(Error::Format { .. })));
        assert!(matches!(load_str("-1,0.5\n0,1\n"), Err(Error::Format { .. })));
        assert!(matches!(load_str("1,NaN\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn round_trip_preserves_bits() {
        let ds = Dataset::new(
            "x",
            vec![
                LabeledExample::new(vec![0.1, -1e-300, 1.0 / 3.0], 4),
                LabeledExample::new(vec![f64::MAX, 2.5, -0.0], 0),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv_features(&ds, &path).unwrap();
        let back = load_csv_features(&path).unwrap();
        assert_eq!(back.examples(), ds.examples());
    }
}
