//! Report files.
//!
//! JSON reports are `{"format": "osbp-report", "version": 1, "report": {...}}` with the
//! fields of [`EvalReport`]; sweeps use `"osbp-sweep"` and carry `param` and `rows`.
//! Floats are written in the shortest form that parses back to the same bits.
//!
//! CSV reports are `metric,value` lines. CSV sweeps have the header
//! `param,OS,OS_star,ALL,UNK` and one row per grid point; fields of failed rows and
//! undefined metrics are empty. CSV numbers use 17 significant digits.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::EvalReport;
use crate::eval::sweep::SweepTable;

pub const REPORT_VERSION: u32 = 1;
const REPORT_FORMAT: &str = "osbp-report";
const SWEEP_FORMAT: &str = "osbp-sweep";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Usage(format!(
                "unknown report format {other:?} (expected json or csv)"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<R> {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: R,
}

#[derive(Serialize, Deserialize)]
struct ReportBody {
    report: EvalReport,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => {
            let envelope = Envelope {
                format: REPORT_FORMAT.into(),
                version: REPORT_VERSION,
                body: ReportBody { report: report.clone() },
            };
            serde_json::to_string_pretty(&envelope).expect("reports serialize") + "\n"
        }
        ReportFormat::Csv => {
            let mut s = String::from("metric,value\n");
            s += &format!(
                "OS,{}\nOS_star,{}\nALL,{}\nUNK,{}\nn,{}\n",
                num(report.os),
                opt(report.os_star),
                num(report.all),
                opt(report.unk),
                report.n
            );
            for (c, acc) in report.per_class_acc.iter().enumerate() {
                s += &format!("class_{c},{}\n", opt(*acc));
            }
            s
        }
    };
    write_text(path, text)
}

/// Reads a JSON report written by [`write_report`].
pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let envelope: Envelope<ReportBody> = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if envelope.format != REPORT_FORMAT || envelope.version != REPORT_VERSION {
        return Err(Error::format(
            path,
            format!(
                "expected {REPORT_FORMAT} version {REPORT_VERSION}, found {} version {}",
                envelope.format, envelope.version
            ),
        ));
    }
    Ok(envelope.body.report)
}

pub fn write_sweep(table: &SweepTable, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => {
            let envelope = Envelope {
                format: SWEEP_FORMAT.into(),
                version: REPORT_VERSION,
                body: table.clone(),
            };
            serde_json::to_string_pretty(&envelope).expect("sweeps serialize") + "\n"
        }
        ReportFormat::Csv => {
            let mut s = String::from("param,OS,OS_star,ALL,UNK\n");
            for row in &table.rows {
                let r = row.report.as_ref();
                s += &format!(
                    "{},{},{},{},{}\n",
                    num(row.value),
                    opt(r.map(|r| r.os)),
                    opt(r.and_then(|r| r.os_star)),
                    opt(r.map(|r| r.all)),
                    opt(r.and_then(|r| r.unk)),
                );
            }
            s
        }
    };
    write_text(path, text)
}

/// One parsed sweep CSV row: the parameter value and `[OS, OS_star, ALL, UNK]`.
pub type SweepCsvRow = (f64, [Option<f64>; 4]);

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepCsvRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let parse = |field: &str| -> Result<Option<f64>> {
        if field.is_empty() {
            return Ok(None);
        }
        field
            .parse()
            .map(Some)
            .map_err(|_| Error::format(path, format!("bad number {field:?}")))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != 5 {
            return Err(Error::format(
                path,
                format!("expected 5 columns, found {}", record.len()),
            ));
        }
        let value = parse(&record[0])?.ok_or_else(|| Error::format(path, "missing parameter value"))?;
        rows.push((
            value,
            [
                parse(&record[1])?,
                parse(&record[2])?,
                parse(&record[3])?,
                parse(&record[4])?,
            ],
        ));
    }
    Ok(rows)
}
