//! Run configuration: one TOML file per run, with `--set section.key=value` overrides.
//!
//! ```toml
//! [data]
//! kind = "synth"          # synth | csv | idx | manifest
//! seed = 0
//! known = [0, 1, 2]       # original labels kept as known; synth defaults to 0..K
//! unknown_ratio = 0.4     # optional target subsampling
//! source = "source.csv"   # csv
//! target = "target.csv"
//! source_images = "..."   # idx (also source_labels, target_images, target_labels)
//! manifest = "scenario.toml"
//!
//! [data.synth]
//! known_classes = 3
//! shift = [0.75, 0.75]
//!
//! [model]
//! hidden = [100, 100]
//! classifier_hidden = []
//! batch_norm = true
//! leaky_slope = 0.01
//!
//! [train]
//! method = "osbp"         # osbp | source_only | mmd | bp
//! t = 0.5
//! optimizer = "sgd"       # sgd | adam
//! lr = 1e-3
//! epochs = 500
//!
//! [output]
//! report = "report.json"
//! format = "json"
//! checkpoint = "model.json"
//! dump_features = false
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use osbp::baselines::{DomainHeadSpec, MmdConfig, RejectorConfig};
use osbp::data::SynthConfig;
use osbp::eval::ReportFormat;
use osbp::nn::layer::DEFAULT_LEAKY_SLOPE;
use osbp::nn::Optimizer;
use osbp::osbp::{Architecture, Freeze, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::exit::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    #[default]
    Synth,
    Csv,
    Idx,
    Manifest,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub kind: DataKind,
    pub seed: u64,
    pub known: Option<Vec<usize>>,
    pub unknown_ratio: Option<f64>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub source_images: Option<PathBuf>,
    pub source_labels: Option<PathBuf>,
    pub target_images: Option<PathBuf>,
    pub target_labels: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub batch_norm: bool,
    pub leaky_slope: f64,
    pub dropout: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: vec![100, 100],
            classifier_hidden: Vec::new(),
            batch_norm: true,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            dropout: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Osbp,
    SourceOnly,
    Mmd,
    Bp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// `None` fields take a default that depends on the data kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub method: Method,
    pub t: f64,
    pub optimizer: Option<OptimizerKind>,
    pub lr: Option<f64>,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: u64,
    pub grl_weight: f64,
    pub mmd_sigmas: Vec<f64>,
    pub mmd_weight: f64,
    pub threshold: f64,
    pub domain_hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let mmd = MmdConfig::default();
        Self {
            method: Method::Osbp,
            t: 0.5,
            optimizer: None,
            lr: None,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: None,
            epochs: None,
            seed: 0,
            grl_weight: 1.0,
            mmd_sigmas: mmd.sigmas,
            mmd_weight: mmd.weight,
            threshold: RejectorConfig::default().threshold,
            domain_hidden: DomainHeadSpec::default().hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub report: PathBuf,
    pub format: ReportFormat,
    pub checkpoint: Option<PathBuf>,
    pub dump_features: bool,
    pub features: PathBuf,
    pub sweep: PathBuf,
    pub sweep_format: ReportFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            report: "report.json".into(),
            format: ReportFormat::Json,
            checkpoint: None,
            dump_features: false,
            features: "features.csv".into(),
            sweep: "sweep.csv".into(),
            sweep_format: ReportFormat::Csv,
        }
    }
}

/// Training defaults per data kind: feature tables train with momentum SGD for 500
/// epochs at batch 32, digit images with Adam for 200 epochs at batch 128.
struct KindDefaults {
    optimizer: OptimizerKind,
    lr: f64,
    batch_size: usize,
    epochs: usize,
}

fn kind_defaults(kind: DataKind) -> KindDefaults {
    match kind {
        DataKind::Idx => KindDefaults {
            optimizer: OptimizerKind::Adam,
            lr: 2e-5,
            batch_size: 128,
            epochs: 200,
        },
        DataKind::Synth | DataKind::Csv | DataKind::Manifest => KindDefaults {
            optimizer: OptimizerKind::Sgd,
            lr: 1e-3,
            batch_size: 32,
            epochs: 500,
        },
    }
}

/// A parsed config and the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    /// Reads `path` (or starts from defaults), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, base) = match path {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, base)
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config = RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::config(e.to_string()))?;
        config.validate()?;
        Ok(Self { config, base })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base.join(path)
    }
}

/// Sets `section.key = value` in the raw table. The value is read as a TOML literal and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override {item:?} is not of the form key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("override key {key:?} is malformed")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for part in path {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override {key:?}: {part} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |key: &str, why: String| Err(CliError::config(format!("{key}: {why}")));
        if self.data.kind == DataKind::Synth {
            self.data.synth.validate().map_err(CliError::from)?;
        }
        if let Some(r) = self.data.unknown_ratio {
            if !(0.0..1.0).contains(&r) {
                return fail("data.unknown_ratio", format!("must lie in [0,1), got {r}"));
            }
        }
        if matches!(&self.data.known, Some(k) if k.is_empty()) {
            return fail("data.known", "must not be empty".into());
        }
        if self.model.hidden.contains(&0) || self.model.classifier_hidden.contains(&0) {
            return fail("model.hidden", "layer widths must be >= 1".into());
        }
        if !(self.model.leaky_slope >= 0.0 && self.model.leaky_slope.is_finite()) {
            return fail(
                "model.leaky_slope",
                format!("must be >= 0, got {}", self.model.leaky_slope),
            );
        }
        if let Some(rate) = self.model.dropout {
            if !(0.0..1.0).contains(&rate) {
                return fail("model.dropout", format!("must lie in [0,1), got {rate}"));
            }
        }
        if self.train.domain_hidden == 0 {
            return fail("train.domain_hidden", "must be >= 1".into());
        }
        self.train_config().validate().map_err(CliError::from)?;
        self.mmd().validate().map_err(CliError::from)?;
        self.rejector().validate().map_err(CliError::from)?;
        Ok(())
    }

    pub fn optimizer(&self) -> Optimizer {
        let defaults = kind_defaults(self.data.kind);
        let lr = self.train.lr.unwrap_or(defaults.lr);
        match self.train.optimizer.unwrap_or(defaults.optimizer) {
            OptimizerKind::Sgd => Optimizer::SgdMomentum {
                lr,
                momentum: self.train.momentum,
            },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: self.train.beta1,
                beta2: self.train.beta2,
                epsilon: self.train.epsilon,
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let defaults = kind_defaults(self.data.kind);
        TrainConfig {
            t: self.train.t,
            optimizer: self.optimizer(),
            batch_size: self.train.batch_size.unwrap_or(defaults.batch_size),
            epochs: self.train.epochs.unwrap_or(defaults.epochs),
            seed: self.train.seed,
            grl_weight: self.train.grl_weight,
            freeze: Freeze::Nothing,
        }
    }

    pub fn architecture(&self, input: usize) -> Architecture {
        Architecture {
            input,
            generator: self.model.hidden.clone(),
            classifier_hidden: self.model.classifier_hidden.clone(),
            batch_norm: self.model.batch_norm,
            leaky_slope: self.model.leaky_slope,
            dropout: self.model.dropout,
        }
    }

    pub fn mmd(&self) -> MmdConfig {
        MmdConfig {
            sigmas: self.train.mmd_sigmas.clone(),
            weight: self.train.mmd_weight,
        }
    }

    pub fn rejector(&self) -> RejectorConfig {
        RejectorConfig {
            threshold: self.train.threshold,
        }
    }

    pub fn domain_head(&self) -> DomainHeadSpec {
        DomainHeadSpec {
            hidden: self.train.domain_hidden,
            grl_weight: self.train.grl_weight,
        }
    }
}
