//! Big-endian IDX files (MNIST/USPS layout).

use std::fs;
use std::path::Path;

use crate::data::dataset::{Dataset, LabeledExample};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, format!("truncated header at byte {offset}")))
}

fn check_magic(found: u32, expected: u32, path: &Path) -> Result<()> {
    if found != expected {
        return Err(Error::format(
            path,
            format!("bad magic number {found} (0x{found:08x}), expected {expected} (0x{expected:08x})"),
        ));
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an image file (magic 2051, dims n × rows × cols) and a label file (magic 2049).
/// Pixels are scaled to `[0, 1]` and flattened row-major.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let images = read(images_path)?;
    let labels = read(labels_path)?;

    check_magic(read_u32(&images, 0, images_path)?, IMAGES_MAGIC, images_path)?;
    let n_images = read_u32(&images, 4, images_path)? as usize;
    let rows = read_u32(&images, 8, images_path)? as usize;
    let cols = read_u32(&images, 12, images_path)? as usize;

    check_magic(read_u32(&labels, 0, labels_path)?, LABELS_MAGIC, labels_path)?;
    let n_labels = read_u32(&labels, 4, labels_path)? as usize;

    if n_images != n_labels {
        return Err(Error::format(
            labels_path,
            format!("{n_images} images but {n_labels} labels"),
        ));
    }
    let width = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != n_images * width {
        return Err(Error::format(
            images_path,
            format!("expected {} pixel bytes, found {}", n_images * width, pixels.len()),
        ));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n_labels {
        return Err(Error::format(
            labels_path,
            format!("expected {n_labels} label bytes, found {}", label_bytes.len()),
        ));
    }
    let examples = pixels
        .chunks(width.max(1))
        .take(n_images)
        .zip(label_bytes)
        .map(|(px, &y)| LabeledExample::new(px.iter().map(|&p| p as f64 / 255.0).collect(), y as usize))
        .collect();
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::with_width(name, width, examples)
}

/// Writes a dataset as an IDX image/label pair. Features are mapped back to bytes by
/// `round(v · 255)`; labels must fit in a byte.
pub fn write_idx(
    dataset: &Dataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    if rows * cols != dataset.width() {
        return Err(Error::Validation(format!(
            "{rows}x{cols} images do not match width {}",
            dataset.width()
        )));
    }
    let n = u32::try_from(dataset.len()).map_err(|_| Error::Validation("too many examples for IDX".into()))?;
    let mut images = Vec::with_capacity(16 + dataset.len() * dataset.width());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    for ex in dataset.examples() {
        images.extend(ex.features.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        let y = u8::try_from(ex.label)
            .map_err(|_| Error::Validation(format!("label {} does not fit in a byte", ex.label)))?;
        labels.push(y);
    }
    fs::write(images_path, images).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out
    }

    #[test]
    fn hand_crafted_two_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let mut images = header(2051, &[2, 2, 2]);
        images.extend_from_slice(&[0, 255, 255, 0, 255, 255, 0, 0]);
        let mut labels = header(2049, &[2]);
        labels.extend_from_slice(&[3, 7]);
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        fs::write(&ip, images).unwrap();
        fs::write(&lp, labels).unwrap();

        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.width(), 4);
        assert_eq!(ds.examples()[0].features, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ds.examples()[1].features, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(ds.labels(), vec![3, 7]);
    }

    #[test]
    fn wrong_magic_reports_found_value() {
        let dir = tempfile::tempdir().unwrap();
        let mut images = header(2051, &[1, 1, 1]);
        images.push(9);
        let mut labels = header(2051, &[1]);
        labels.push(0);
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        fs::write(&ip, images).unwrap();
        fs::write(&lp, labels).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("2051"), "{err}");
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut images = header(2051, &[3, 1, 1]);
        images.extend_from_slice(&[1, 2, 3]);
        let mut labels = header(2049, &[2]);
        labels.extend_from_slice(&[0, 1]);
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        fs::write(&ip, images).unwrap();
        fs::write(&lp, labels).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err();
        assert!(err.to_string().contains("3 images but 2 labels"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_idx("/nonexistent/a", "/nonexistent/b"),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn write_then_load_is_bit_identical(
            pixels in prop::collection::vec(any::<u8>(), 12),
            labels in prop::collection::vec(0usize..10, 3),
        ) {
            let examples = pixels
                .chunks(4)
                .zip(&labels)
                .map(|(px, &y)| LabeledExample::new(px.iter().map(|&p| p as f64 / 255.0).collect(), y))
                .collect();
            let ds = Dataset::with_width("fixture", 4, examples).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
            write_idx(&ds, 2, 2, &ip, &lp).unwrap();
            let back = load_idx(&ip, &lp).unwrap();
            prop_assert_eq!(back.labels(), ds.labels());
            for (a, b) in back.examples().iter().zip(ds.examples()) {
                for (x, y) in a.features.iter().zip(&b.features) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
