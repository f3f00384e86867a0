//! Scenario manifest: a small TOML file naming the data files and the open-set split.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::csv_io::load_csv_features;
use crate::data::dataset::Dataset;
use crate::data::idx::load_idx;
use crate::data::scenario::{make_scenario, OpenSetScenario};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Where one domain's data lives. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf },
    Idx { images: PathBuf, labels: PathBuf },
}

impl DataSource {
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DataSource::Csv { path } => load_csv_features(base.join(path)),
            DataSource::Idx { images, labels } => load_idx(base.join(images), base.join(labels)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioManifest {
    pub version: u32,
    pub source: DataSource,
    pub target: DataSource,
    /// Original labels treated as known.
    pub known: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown_ratio: Option<f64>,
    pub seed: u64,
    /// Informational counts written by generators; ignored when loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<ManifestSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSummary {
    pub known_classes: usize,
    pub source_size: usize,
    pub target_size: usize,
}

impl ScenarioManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported manifest version {}", manifest.version),
            ));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads both domains relative to `base` and applies the split.
    pub fn build(&self, base: &Path) -> Result<OpenSetScenario> {
        let source = self.source.load(base)?;
        let target = self.target.load(base)?;
        let known: BTreeSet<usize> = self.known.iter().copied().collect();
        make_scenario(&source, &target, &known, self.seed, self.unknown_ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::csv_io::write_csv_features;
    use crate::data::synth::{synth_domains, SynthConfig};

    #[test]
    fn manifest_round_trip_and_build() {
        let dir = tempfile::tempdir().unwrap();
        let (source, target) = synth_domains(&SynthConfig::default(), 4).unwrap();
        write_csv_features(&source, dir.path().join("source.csv")).unwrap();
        write_csv_features(&target, dir.path().join("target.csv")).unwrap();
        let manifest = ScenarioManifest {
            version: MANIFEST_VERSION,
            source: DataSource::Csv {
                path: "source.csv".into(),
            },
            target: DataSource::Csv {
                path: "target.csv".into(),
            },
            known: vec![0, 1, 2],
            unknown_ratio: Some(0.25),
            seed: 4,
            summary: None,
        };
        let path = dir.path().join("scenario.toml");
        manifest.write(&path).unwrap();
        let back = ScenarioManifest::read(&path).unwrap();
        assert_eq!(back, manifest);
        let sc = back.build(dir.path()).unwrap();
        assert_eq!(sc.known_classes(), 3);
        assert!((sc.unknown_fraction() - 0.25).abs() < 1.0 / sc.target().len() as f64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        fs::write(
            &path,
            "version = 1\nseed = 0\nknown = [0]\nbogus = 1\n[source]\nformat = \"csv\"\npath = \"a\"\n[target]\nformat = \"csv\"\npath = \"b\"\n",
        )
        .unwrap();
        let err = ScenarioManifest::read(&path).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }
}
