//! Datasets, file loaders, synthetic open-set scenarios and minibatching.

pub mod batch;
pub mod csv_io;
pub mod dataset;
pub mod idx;
pub mod manifest;
pub mod scenario;
pub mod synth;

pub use batch::{batches, PairedBatches, Pairing};
pub use csv_io::{load_csv_features, write_csv_features};
pub use dataset::{Dataset, LabeledExample, TrainingData, Unlabeled};
pub use idx::{load_idx, write_idx};
pub use manifest::ScenarioManifest;
pub use scenario::{make_scenario, OpenSetScenario};
pub use synth::{synth_domains, synth_openset, SynthConfig};
