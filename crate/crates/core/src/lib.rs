//! Open-set domain adaptation by backpropagation.
//!
//! A feature generator `G` and a `K+1`-way classifier `C` are trained adversarially:
//! `C` is pushed to output probability `t` for the unknown class on target samples,
//! while `G`, through a gradient-reversal layer, is pushed away from `t`. Target samples
//! end up either aligned with a known source class or rejected as unknown.
//!
//! The crate also carries the comparison baselines (source-only training with a
//! softmax-threshold rejector, MMD alignment, domain-classifier alignment), open-set
//! scenario construction and the evaluation suite (OS, OS*, ALL, UNK).
//!
//! The numeric engine is generic over [`Scalar`] (`f32`, `f64`); the aliases below fix
//! the common choice of `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod checks;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod osbp;
pub mod scalar;
pub(crate) mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = nn::Matrix<f64>;
pub type Matrix32 = nn::Matrix<f32>;
pub type LayerStack64 = nn::LayerStack<f64>;
pub type LayerStack32 = nn::LayerStack<f32>;
pub type Model64 = osbp::Model<f64>;
pub type Model32 = osbp::Model<f32>;
