//! Distributional reinforcement learning with adversarially trained return
//! generators.
//!
//! A conditional generator learns the distribution of discounted returns
//! by playing against a critic that compares its samples with their own
//! one-step backups. The magnitude of the generator's training gradient
//! doubles as an exploration bonus.

pub mod autodiff;
pub mod bellman_gan;
pub mod dqn;
pub mod environments;
pub mod exploration;
pub mod experiment;
pub mod metrics;
pub mod neural;
