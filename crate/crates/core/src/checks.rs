//! The gradient-check suite: every layer kind under both losses on random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{MmdConfig, MmdObjective};
use crate::error::Result;
use crate::nn::gradcheck::{grad_check_corrupted, DEFAULT_EPS};
use crate::nn::{LayerSpec, LayerStack, Matrix, NamedLoss, Objective};

pub const TOLERANCE: f64 = 1e-4;
pub const DEFAULT_INSTANCES: usize = 20;

/// Layer kinds exercised by the suite. Each is sandwiched between affine layers so the
/// check covers parameters upstream and downstream of it.
pub const LAYER_KINDS: [&str; 6] = [
    "affine",
    "leaky_relu",
    "batch_norm",
    "grad_reversal",
    "dropout",
    "osbp_path",
];

/// Worst relative error of one layer/loss combination over all its instances.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub layer: &'static str,
    pub loss: &'static str,
    pub instances: usize,
    pub entries: usize,
    pub worst: f64,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.worst < TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub instances: usize,
    pub seed: u64,
    /// Scales every analytic gradient by this factor; `None` for a faithful check.
    pub corrupt: Option<f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            instances: DEFAULT_INSTANCES,
            seed: 0,
            corrupt: None,
        }
    }
}

fn middle(kind: &str, width: usize, rng: &mut ChaCha8Rng) -> Vec<LayerSpec> {
    match kind {
        "affine" => vec![LayerSpec::affine(width, width)],
        "leaky_relu" => vec![LayerSpec::LeakyRelu {
            slope: rng.random_range(0.01..0.3),
        }],
        "batch_norm" => vec![LayerSpec::batch_norm(width)],
        "grad_reversal" => vec![LayerSpec::grad_reversal(rng.random_range(0.1..2.0))],
        "dropout" => vec![LayerSpec::Dropout { rate: 0.3 }],
        // Generator block, reversal, classifier block: the adversarial target path.
        "osbp_path" => vec![
            LayerSpec::batch_norm(width),
            LayerSpec::leaky_relu(),
            LayerSpec::affine(width, width),
            LayerSpec::grad_reversal(1.0),
            LayerSpec::affine(width, width),
            LayerSpec::leaky_relu(),
        ],
        other => unreachable!("unknown layer kind {other}"),
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .expect("sized")
}

fn run_case(kind: &'static str, loss: &'static str, opts: &SuiteOptions) -> Result<CaseResult> {
    let tag = kind
        .bytes()
        .chain(loss.bytes())
        .fold(opts.seed, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(tag);
    let mut worst = 0.0f64;
    let mut entries = 0;
    for _ in 0..opts.instances {
        let input = rng.random_range(2..6);
        let hidden = rng.random_range(2..6);
        let classes = rng.random_range(2..5);
        let batch = rng.random_range(3..8);
        let mut specs = vec![LayerSpec::affine(input, hidden)];
        specs.extend(middle(kind, hidden, &mut rng));
        let outputs = if loss == "mmd" { hidden } else { classes };
        specs.push(LayerSpec::affine(hidden, outputs));
        let stack = LayerStack::<f64>::new(&specs, rng.random())?;
        let x = random_matrix(batch, input, &mut rng);
        let objective: Box<dyn Objective<f64>> = match loss {
            "cross_entropy" => Box::new(NamedLoss::CrossEntropy {
                labels: (0..batch).map(|_| rng.random_range(0..classes)).collect(),
            }),
            "adv_bce" => Box::new(NamedLoss::AdvBce {
                t: rng.random_range(0.1..0.9),
            }),
            _ => Box::new(MmdObjective {
                split: batch / 2,
                config: MmdConfig {
                    sigmas: vec![0.5, 1.0, 2.0],
                    weight: 1.0,
                },
            }),
        };
        let check = grad_check_corrupted(&stack, objective.as_ref(), &x, DEFAULT_EPS, opts.corrupt.unwrap_or(1.0))?;
        worst = worst.max(check.max_rel_error);
        entries += check.entries;
    }
    Ok(CaseResult {
        layer: kind,
        loss,
        instances: opts.instances,
        entries,
        worst,
    })
}

/// Runs every layer kind under cross-entropy and the adversarial loss, plus the MMD
/// alignment loss on an affine stack. Returns one result per case.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<CaseResult>> {
    let mut results = Vec::new();
    for kind in LAYER_KINDS {
        for loss in ["cross_entropy", "adv_bce"] {
            results.push(run_case(kind, loss, opts)?);
        }
    }
    results.push(run_case("affine", "mmd", opts)?);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corruption_is_detected() {
        let opts = SuiteOptions {
            instances: 2,
            corrupt: Some(1.5),
            ..SuiteOptions::default()
        };
        let r = run_case("affine", "cross_entropy", &opts).unwrap();
        assert!(!r.passed(), "{r:?}");
    }

    #[test]
    fn a_few_instances_pass() {
        let opts = SuiteOptions {
            instances: 3,
            ..SuiteOptions::default()
        };
        for r in run_suite(&opts).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}
