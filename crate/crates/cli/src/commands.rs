//! One function per subcommand. Each returns the text it would print on success.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use osbp::checks::{run_suite, SuiteOptions};
use osbp::data::manifest::{DataSource, ManifestSummary, MANIFEST_VERSION};
use osbp::data::{synth_domains, write_csv_features, ScenarioManifest};
use osbp::eval::{dump_features, sweep, write_report, write_sweep, EvalReport};
use osbp::osbp::checkpoint::check_architecture;
use osbp::osbp::{load_checkpoint, save_checkpoint, EpochProgress};
use osbp::Model64;

use crate::config::{Loaded, RunConfig};
use crate::exit::CliError;
use crate::pipeline::{evaluate_trained, expected_layers, load_scenario, run};

pub const SWEEP_PARAMS: [&str; 4] = ["t", "unknown_ratio", "grl_weight", "threshold"];

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

pub fn summary_line(report: &EvalReport) -> String {
    format!(
        "OS={} OS*={} ALL={} UNK={}",
        fmt_metric(Some(report.os)),
        fmt_metric(report.os_star),
        fmt_metric(Some(report.all)),
        fmt_metric(report.unk)
    )
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

/// Writes source/target CSVs and `scenario.toml` into `out_dir`.
pub fn synth(loaded: &Loaded, out_dir: &Path) -> Result<String, CliError> {
    let data = &loaded.config.data;
    let (source, target) = synth_domains(&data.synth, data.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", out_dir.display())))?;
    write_csv_features(&source, out_dir.join("source.csv"))?;
    write_csv_features(&target, out_dir.join("target.csv"))?;
    let known = data
        .known
        .clone()
        .unwrap_or_else(|| (0..data.synth.known_classes).collect());
    let manifest = ScenarioManifest {
        version: MANIFEST_VERSION,
        source: DataSource::Csv {
            path: "source.csv".into(),
        },
        target: DataSource::Csv {
            path: "target.csv".into(),
        },
        known,
        unknown_ratio: data.unknown_ratio,
        seed: data.seed,
        summary: Some(ManifestSummary {
            known_classes: data.synth.known_classes,
            source_size: source.len(),
            target_size: target.len(),
        }),
    };
    let path = out_dir.join("scenario.toml");
    manifest.write(&path)?;
    Ok(format!(
        "wrote {} (K={}, source={}, target={}, seed={})",
        path.display(),
        data.synth.known_classes,
        source.len(),
        target.len(),
        data.seed
    ))
}

pub struct TrainOutputs {
    pub report: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

pub fn output_paths(loaded: &Loaded) -> TrainOutputs {
    let out = &loaded.config.output;
    TrainOutputs {
        report: loaded.resolve(&out.report),
        checkpoint: out.checkpoint.as_ref().map(|p| loaded.resolve(p)),
        features: out.dump_features.then(|| loaded.resolve(&out.features)),
    }
}

pub fn train(loaded: &Loaded, progress: bool) -> Result<String, CliError> {
    let mut sink = |p: &EpochProgress| {
        if progress {
            eprintln!(
                "epoch {}/{}: source={:.4} adv={:.4} p_unknown={:.4}",
                p.epoch + 1,
                p.epochs,
                p.stats.source_loss,
                p.stats.adv_loss,
                p.stats.mean_p_unknown
            );
        }
    };
    let (scenario, model, report) = run(loaded, &mut sink)?;
    let paths = output_paths(loaded);
    ensure_parent(&paths.report)?;
    write_report(&report, &paths.report, loaded.config.output.format)?;
    if let Some(path) = &paths.checkpoint {
        ensure_parent(path)?;
        save_checkpoint(&model, path)?;
    }
    if let Some(path) = &paths.features {
        ensure_parent(path)?;
        dump_features(&model, scenario.target(), path)?;
    }
    Ok(summary_line(&report))
}

/// Applies one sweep value to a copy of the config.
pub fn with_param(cfg: &RunConfig, param: &str, value: f64) -> Result<RunConfig, CliError> {
    let mut cfg = cfg.clone();
    match param {
        "t" => cfg.train.t = value,
        "unknown_ratio" => cfg.data.unknown_ratio = Some(value),
        "grl_weight" => cfg.train.grl_weight = value,
        "threshold" => cfg.train.threshold = value,
        other => {
            return Err(CliError::config(format!(
                "unknown sweep parameter {other:?} (expected one of {})",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    Ok(cfg)
}

/// Train-and-evaluate for every value, `repeats` times each with consecutive seeds.
/// Rows that fail are recorded and the sweep still succeeds.
pub fn sweep_cmd(
    loaded: &Loaded,
    param: &str,
    values: &[f64],
    repeats: usize,
    parallel: bool,
    out: Option<&Path>,
) -> Result<String, CliError> {
    with_param(&loaded.config, param, 0.5)?;
    if repeats == 0 {
        return Err(CliError::config("--repeats must be >= 1"));
    }
    let grid: Vec<f64> = values.iter().flat_map(|&v| std::iter::repeat_n(v, repeats)).collect();
    let table = sweep(param, &grid, loaded.config.train.seed, parallel, |value, seed| {
        let mut cfg = with_param(&loaded.config, param, value).map_err(|e| osbp::Error::Config(e.message))?;
        cfg.train.seed = seed;
        cfg.validate().map_err(|e| osbp::Error::Config(e.message))?;
        let row = Loaded {
            config: cfg,
            base: loaded.base.clone(),
        };
        run(&row, &mut |_| {})
            .map(|(_, _, report)| report)
            .map_err(|e| osbp::Error::Validation(e.message))
    })?;
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => loaded.resolve(&loaded.config.output.sweep),
    };
    ensure_parent(&path)?;
    write_sweep(&table, &path, loaded.config.output.sweep_format)?;

    let mut text = String::new();
    for row in &table.rows {
        match (&row.report, &row.error) {
            (Some(r), _) => writeln!(text, "{param}={} seed={} {}", row.value, row.seed, summary_line(r)),
            (None, Some(e)) => writeln!(text, "{param}={} seed={} failed: {e}", row.value, row.seed),
            (None, None) => Ok(()),
        }
        .expect("writing to a String");
    }
    write!(text, "wrote {}", path.display()).expect("writing to a String");
    Ok(text)
}

/// Runs the gradient-check suite; fails with exit 1 unless every case passes.
pub fn gradcheck(opts: &SuiteOptions) -> Result<String, CliError> {
    let results = run_suite(opts)?;
    let mut text = String::new();
    for case in &results {
        writeln!(
            text,
            "{:<14} {:<14} instances={:<3} worst_rel_err={:.3e} {}",
            case.layer,
            case.loss,
            case.instances,
            case.worst,
            if case.passed() { "ok" } else { "FAIL" }
        )
        .expect("writing to a String");
    }
    let failed = results.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::check_failed(format!(
            "{text}{failed} of {} cases failed",
            results.len()
        )));
    }
    write!(text, "all {} cases passed", results.len()).expect("writing to a String");
    Ok(text)
}

/// Evaluates a saved model on the configured target without training.
pub fn eval(loaded: &Loaded, checkpoint: &Path, features: Option<&Path>) -> Result<String, CliError> {
    let model: Model64 = load_checkpoint(checkpoint)?;
    let scenario = load_scenario(loaded)?;
    let (generator, classifier) = expected_layers(&loaded.config, &scenario);
    check_architecture(&model, &generator, &classifier)?;
    let report = evaluate_trained(&loaded.config, &model, scenario.target())?;
    let path = output_paths(loaded).report;
    ensure_parent(&path)?;
    write_report(&report, &path, loaded.config.output.format)?;
    if let Some(path) = features {
        ensure_parent(path)?;
        dump_features(&model, scenario.target(), path)?;
    }
    Ok(summary_line(&report))
}
