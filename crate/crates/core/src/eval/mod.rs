//! Open-set metrics, unknown-probability histograms, sweeps and report files.

pub mod confusion;
pub mod features;
pub mod histogram;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use confusion::ConfusionMatrix;
pub use features::dump_features;
pub use histogram::{histogram_from_values, p_unknown_histogram, PUnknownHistogram, DEFAULT_BINS};
pub use metrics::{accuracies, evaluate, evaluate_model, evaluate_predictions, Accuracies, EvalReport};
pub use report::{read_report, read_sweep_csv, write_report, write_sweep, ReportFormat, REPORT_VERSION};
pub use sweep::{sweep, SweepRow, SweepTable};
