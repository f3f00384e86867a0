//! Comparison methods: source-only training with a softmax-threshold rejector, MMD
//! feature alignment and domain-classifier (gradient reversal) alignment.
//!
//! All baselines use a `K`-way classifier and share one epoch schedule: an epoch is one
//! pass over the source, with target batches drawn from a reshuffling cycle. Target
//! passes through the generator normalize with batch statistics but do not move
//! batch-norm running statistics, so a baseline whose alignment weight is zero follows
//! source-only training exactly.

pub mod bp;
pub mod mmd;
pub mod rejector;
pub mod source_only;

pub use bp::{domain_accuracy, train_bp, DomainAdversarial, DomainHeadSpec};
pub use mmd::{mmd2, mmd2_with_grad, train_mmd, MmdConfig, MmdObjective};
pub use rejector::{threshold_predict, RejectorConfig};
pub use source_only::{train_source_only, BaselineStats};
