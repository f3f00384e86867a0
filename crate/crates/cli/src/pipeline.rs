//! Scenario loading, training of the configured method, and evaluation.

use std::collections::BTreeSet;

use osbp::baselines::{threshold_predict, train_bp, train_mmd, train_source_only, DomainAdversarial};
use osbp::data::{
    load_csv_features, load_idx, make_scenario, synth_domains, Dataset, OpenSetScenario, ScenarioManifest,
};
use osbp::eval::{evaluate, evaluate_model, EvalReport};
use osbp::nn::LayerSpec;
use osbp::osbp::{train, EpochProgress, Head, Model};
use osbp::Model64;

use crate::config::{DataKind, Loaded, Method, RunConfig};
use crate::exit::CliError;

fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::config(format!("data.{key} is required for this data kind")))
}

fn split(
    loaded: &Loaded,
    source: &Dataset,
    target: &Dataset,
    default_known: BTreeSet<usize>,
) -> Result<OpenSetScenario, CliError> {
    let data = &loaded.config.data;
    let known = data
        .known
        .as_ref()
        .map_or(default_known, |k| k.iter().copied().collect());
    Ok(make_scenario(source, target, &known, data.seed, data.unknown_ratio)?)
}

/// Builds the labeled open-set scenario the config describes.
pub fn load_scenario(loaded: &Loaded) -> Result<OpenSetScenario, CliError> {
    let data = &loaded.config.data;
    match data.kind {
        DataKind::Synth => {
            let (source, target) = synth_domains(&data.synth, data.seed)?;
            split(loaded, &source, &target, (0..data.synth.known_classes).collect())
        }
        DataKind::Csv => {
            let source = load_csv_features(loaded.resolve(required(&data.source, "source")?))?;
            let target = load_csv_features(loaded.resolve(required(&data.target, "target")?))?;
            let labels = source.labels().into_iter().collect();
            split(loaded, &source, &target, labels)
        }
        DataKind::Idx => {
            let source = load_idx(
                loaded.resolve(required(&data.source_images, "source_images")?),
                loaded.resolve(required(&data.source_labels, "source_labels")?),
            )?;
            let target = load_idx(
                loaded.resolve(required(&data.target_images, "target_images")?),
                loaded.resolve(required(&data.target_labels, "target_labels")?),
            )?;
            let labels = source.labels().into_iter().collect();
            split(loaded, &source, &target, labels)
        }
        DataKind::Manifest => {
            let path = loaded.resolve(required(&data.manifest, "manifest")?);
            let mut manifest = ScenarioManifest::read(&path)?;
            if let Some(known) = &data.known {
                manifest.known = known.clone();
            }
            if data.unknown_ratio.is_some() {
                manifest.unknown_ratio = data.unknown_ratio;
            }
            let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
            Ok(manifest.build(&base)?)
        }
    }
}

pub fn head_for(method: Method) -> Head {
    match method {
        Method::Osbp => Head::OpenSet,
        Method::SourceOnly | Method::Mmd | Method::Bp => Head::Closed,
    }
}

/// Layer specs a model trained under `cfg` on `scenario` must have.
pub fn expected_layers(cfg: &RunConfig, scenario: &OpenSetScenario) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
    let arch = cfg.architecture(scenario.width());
    let outputs = head_for(cfg.train.method).outputs(scenario.known_classes());
    (arch.generator_specs(), arch.classifier_specs(outputs))
}

/// Initializes and trains the configured method.
pub fn train_model(
    cfg: &RunConfig,
    scenario: &OpenSetScenario,
    sink: &mut dyn FnMut(&EpochProgress),
) -> Result<Model64, CliError> {
    let tc = cfg.train_config();
    let arch = cfg.architecture(scenario.width());
    let k = scenario.known_classes();
    let mut model = Model::new(&arch, k, head_for(cfg.train.method), tc.seed)?;
    match cfg.train.method {
        Method::Osbp => {
            train(&mut model, scenario.training_data(), &tc, sink)?;
        }
        Method::SourceOnly => {
            train_source_only(&mut model, scenario.source(), &tc)?;
        }
        Method::Mmd => {
            train_mmd(&mut model, scenario.training_data(), &tc, &cfg.mmd())?;
        }
        Method::Bp => {
            let mut net = DomainAdversarial::new(model, arch.feature_width(), &cfg.domain_head(), tc.seed)?;
            train_bp(&mut net, scenario.training_data(), &tc)?;
            model = net.model;
        }
    }
    Ok(model)
}

/// Open-set models predict with their own unknown column; closed-set models go through
/// the threshold rejector.
pub fn evaluate_trained(cfg: &RunConfig, model: &Model64, target: &Dataset) -> Result<EvalReport, CliError> {
    let report = match model.head() {
        Head::OpenSet => evaluate_model(model, target)?,
        Head::Closed => {
            let rejector = cfg.rejector();
            evaluate(
                |x| Ok(threshold_predict(&model.classify(x)?, &rejector)),
                target,
                model.known_classes(),
            )?
        }
    };
    Ok(report)
}

/// Loads the scenario, trains and evaluates on the labeled target.
pub fn run(
    loaded: &Loaded,
    sink: &mut dyn FnMut(&EpochProgress),
) -> Result<(OpenSetScenario, Model64, EvalReport), CliError> {
    let scenario = load_scenario(loaded)?;
    let model = train_model(&loaded.config, &scenario, sink)?;
    let report = evaluate_trained(&loaded.config, &model, scenario.target())?;
    Ok((scenario, model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(method: Method) -> Loaded {
        let mut cfg = RunConfig::default();
        cfg.data.synth.source_per_class = 10;
        cfg.data.synth.target_per_class = 10;
        cfg.data.synth.target_per_unknown = 10;
        cfg.model.hidden = vec![8];
        cfg.train.method = method;
        cfg.train.epochs = Some(2);
        Loaded {
            config: cfg,
            base: Default::default(),
        }
    }

    #[test]
    fn every_method_trains_and_reports() {
        for method in [Method::Osbp, Method::SourceOnly, Method::Mmd, Method::Bp] {
            let (scenario, model, report) = run(&small(method), &mut |_| {}).unwrap();
            assert_eq!(model.head(), head_for(method));
            assert_eq!(report.n as usize, scenario.target().len());
            assert_eq!(report.histogram.is_some(), method == Method::Osbp);
        }
    }

    #[test]
    fn known_labels_can_be_narrowed() {
        let mut loaded = small(Method::Osbp);
        loaded.config.data.known = Some(vec![0, 2]);
        let scenario = load_scenario(&loaded).unwrap();
        assert_eq!(scenario.known_labels(), &[0, 2]);
    }

    #[test]
    fn missing_paths_are_config_errors() {
        let mut loaded = small(Method::Osbp);
        loaded.config.data.kind = DataKind::Csv;
        let err = load_scenario(&loaded).unwrap_err();
        assert_eq!(err.code, crate::exit::CONFIG);
        assert!(err.message.contains("data.source"));
    }
}
