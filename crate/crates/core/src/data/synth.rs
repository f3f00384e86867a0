//! Gaussian-cluster open-set benchmarks.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, LabeledExample};
use crate::data::scenario::{make_scenario, OpenSetScenario};
use crate::error::{Error, Result};
use crate::seed;

/// Known class `k` is centred on a circle of radius `known_radius` at angle `2πk/K`;
/// unknown cluster `j` sits on a circle of radius `unknown_radius` at angle
/// `2π(j + ½)/max(U, K)`, i.e. in the gap between known classes `j` and `j + 1` when
/// `U ≤ K`. Only the first two coordinates carry structure. Target points are the
/// same clusters moved by `shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub known_classes: usize,
    pub unknown_clusters: usize,
    pub source_per_class: usize,
    pub target_per_class: usize,
    pub target_per_unknown: usize,
    pub width: usize,
    /// Domain shift added to every target point; empty means no shift.
    pub shift: Vec<f64>,
    pub spread: f64,
    pub known_radius: f64,
    pub unknown_radius: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            known_classes: 3,
            unknown_clusters: 2,
            source_per_class: 50,
            target_per_class: 50,
            target_per_unknown: 50,
            width: 2,
            shift: vec![0.75, 0.75],
            spread: 0.5,
            known_radius: 4.0,
            unknown_radius: 4.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, why: &str| Err(Error::Config(format!("{key}: {why}")));
        if self.known_classes == 0 {
            return fail("known_classes", "must be >= 1");
        }
        if self.source_per_class == 0 {
            return fail("source_per_class", "must be >= 1");
        }
        if self.target_per_class == 0 {
            return fail("target_per_class", "must be >= 1");
        }
        if self.unknown_clusters > 0 && self.target_per_unknown == 0 {
            return fail("target_per_unknown", "must be >= 1 when unknown clusters exist");
        }
        if self.width < 2 {
            return fail("width", "must be >= 2");
        }
        if !self.shift.is_empty() && self.shift.len() != self.width {
            return fail("shift", "length must equal width");
        }
        if self.shift.iter().any(|v| !v.is_finite()) {
            return fail("shift", "values must be finite");
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return fail("spread", "must be positive");
        }
        if !(self.known_radius >= 0.0 && self.known_radius.is_finite()) {
            return fail("known_radius", "must be non-negative");
        }
        if !(self.unknown_radius >= 0.0 && self.unknown_radius.is_finite()) {
            return fail("unknown_radius", "must be non-negative");
        }
        Ok(())
    }

    fn center(&self, radius: f64, angle: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.width];
        c[0] = radius * angle.cos();
        c[1] = radius * angle.sin();
        c
    }

    pub fn known_center(&self, class: usize) -> Vec<f64> {
        self.center(self.known_radius, TAU * class as f64 / self.known_classes as f64)
    }

    pub fn unknown_center(&self, cluster: usize) -> Vec<f64> {
        self.center(
            self.unknown_radius,
            TAU * (cluster as f64 + 0.5) / self.unknown_clusters.max(self.known_classes) as f64,
        )
    }
}

fn cluster(
    center: &[f64],
    offset: &[f64],
    count: usize,
    label: usize,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Vec<LabeledExample> {
    (0..count)
        .map(|_| {
            let features = center
                .iter()
                .enumerate()
                .map(|(d, &c)| c + offset.get(d).copied().unwrap_or(0.0) + noise.sample(rng))
                .collect();
            LabeledExample::new(features, label)
        })
        .collect()
}

/// Raw source/target sets. Unknown cluster `j` carries original label `K + j`.
pub fn synth_domains(cfg: &SynthConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let noise = Normal::new(0.0, cfg.spread).map_err(|e| Error::Config(format!("spread: {e}")))?;
    let mut source_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "synth/source"));
    let mut target_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "synth/target"));
    let k = cfg.known_classes;

    let mut source = Vec::with_capacity(k * cfg.source_per_class);
    let mut target = Vec::new();
    for class in 0..k {
        let c = cfg.known_center(class);
        source.extend(cluster(&c, &[], cfg.source_per_class, class, &noise, &mut source_rng));
        target.extend(cluster(
            &c,
            &cfg.shift,
            cfg.target_per_class,
            class,
            &noise,
            &mut target_rng,
        ));
    }
    for j in 0..cfg.unknown_clusters {
        let c = cfg.unknown_center(j);
        target.extend(cluster(
            &c,
            &cfg.shift,
            cfg.target_per_unknown,
            k + j,
            &noise,
            &mut target_rng,
        ));
    }
    Ok((
        Dataset::with_width("synth-source", cfg.width, source)?,
        Dataset::with_width("synth-target", cfg.width, target)?,
    ))
}

/// Relabeled scenario with every unknown cluster mapped to `K`.
pub fn synth_openset(cfg: &SynthConfig, seed: u64) -> Result<OpenSetScenario> {
    let (source, target) = synth_domains(cfg, seed)?;
    let known: BTreeSet<usize> = (0..cfg.known_classes).collect();
    make_scenario(&source, &target, &known, seed, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_config() {
        let cfg = SynthConfig {
            known_classes: 3,
            unknown_clusters: 2,
            ..SynthConfig::default()
        };
        let sc = synth_openset(&cfg, 1).unwrap();
        assert_eq!(sc.source().len(), 150);
        assert_eq!(sc.target().len(), 150 + 2 * 50);
        assert_eq!(sc.known_classes(), 3);
        assert!(sc.source().labels().iter().all(|&y| y < 3));
        assert_eq!(sc.target().labels().iter().filter(|&&y| y == 3).count(), 100);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_openset(&cfg, 7).unwrap(), synth_openset(&cfg, 7).unwrap());
        assert_ne!(synth_openset(&cfg, 7).unwrap(), synth_openset(&cfg, 8).unwrap());
    }

    #[test]
    fn target_is_shifted() {
        let cfg = SynthConfig {
            source_per_class: 400,
            target_per_class: 400,
            unknown_clusters: 0,
            shift: vec![2.0, -1.0],
            ..SynthConfig::default()
        };
        let (source, target) = synth_domains(&cfg, 3).unwrap();
        let mean = |d: &Dataset, dim: usize| d.examples().iter().map(|e| e.features[dim]).sum::<f64>() / d.len() as f64;
        assert!((mean(&target, 0) - mean(&source, 0) - 2.0).abs() < 0.1);
        assert!((mean(&target, 1) - mean(&source, 1) + 1.0).abs() < 0.1);
    }

    #[test]
    fn invalid_configs_name_the_key() {
        let bad = SynthConfig {
            spread: -1.0,
            ..SynthConfig::default()
        };
        assert!(synth_domains(&bad, 0).unwrap_err().to_string().contains("spread"));
        let bad = SynthConfig {
            shift: vec![1.0],
            ..SynthConfig::default()
        };
        assert!(synth_domains(&bad, 0).unwrap_err().to_string().contains("shift"));
        let bad = SynthConfig {
            known_classes: 0,
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
