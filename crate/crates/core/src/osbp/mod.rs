//! The adversarial open-set trainer: generator `G`, `K+1`-way classifier `C`, and the
//! minibatch procedure that makes `C` hold the unknown probability of target samples at
//! `t` while `G` pushes it away.

pub mod checkpoint;
pub mod model;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{Architecture, Head, Model};
pub use trainer::{
    adversarial_gradients, apply_gradients, osbp_gradients, osbp_step, train, EpochProgress, Freeze, StepStats,
    TrainConfig,
};
