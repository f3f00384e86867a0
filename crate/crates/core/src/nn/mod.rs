//! Feed-forward engine: matrices, layers with explicit backward passes, losses,
//! optimizers and a finite-difference gradient checker.

pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod optim;
pub mod stack;

pub use gradcheck::{grad_check, grad_check_with_inputs, GradCheck, NamedLoss, Objective};
pub use layer::{Layer, LayerSpec, Param};
pub use loss::{adv_bce, binary_entropy, cross_entropy, softmax};
pub use matrix::Matrix;
pub use optim::{adam_step, sgd_momentum_step, Optimizer};
pub use stack::{ForwardTrace, LayerStack, Mode};
