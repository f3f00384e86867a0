//! One train-and-evaluate run per grid value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::EvalReport;

/// Outcome of one grid point. Exactly one of `report` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: String,
    pub rows: Vec<SweepRow>,
}

/// Calls `runner(value, base_seed + index)` for each grid value. A failing run is recorded
/// in its row and the sweep continues. Rows follow grid order whether or not runs execute
/// in parallel.
pub fn sweep<F>(param: &str, values: &[f64], base_seed: u64, parallel: bool, runner: F) -> Result<SweepTable>
where
    F: Fn(f64, u64) -> Result<EvalReport> + Sync,
{
    if values.is_empty() {
        return Err(Error::Config(format!("sweep over {param:?} has an empty grid")));
    }
    let run = |(i, &value): (usize, &f64)| {
        let seed = base_seed.wrapping_add(i as u64);
        let (report, error) = match runner(value, seed) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        SweepRow {
            value,
            seed,
            report,
            error,
        }
    };
    let rows = if parallel {
        values.par_iter().enumerate().map(run).collect()
    } else {
        values.iter().enumerate().map(run).collect()
    };
    Ok(SweepTable {
        param: param.to_string(),
        rows,
    })
}
