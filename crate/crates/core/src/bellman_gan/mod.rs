//! Adversarial learning of return distributions: a conditional generator
//! is trained so that its samples at `(s, a)` match, in Wasserstein-1, its
//! own samples pushed through one step of the distributional backup.

mod losses;
mod replay;
mod trainer;

pub use losses::{critic_loss, generated_pair, generator_loss, interpolate, Batch, CriticLoss};
pub use replay::{ReplayPool, Transition};
pub use trainer::{
    Baseline, IterationStats, NextAction, ResampledNextAction, Stopwatch, StoredNextAction,
    VdalConfig, VdalTrainer,
};

use thiserror::Error;

use crate::autodiff::{AutodiffError, Tensor};
use crate::neural::NeuralError;

#[derive(Debug, Error)]
pub enum VdalError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("replay pool is empty")]
    EmptyPool,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Fixed per-pair offsets, e.g. a separately learned expected return.
#[derive(Clone, Debug, PartialEq)]
pub struct TableBaseline {
    n_actions: usize,
    /// Row `s * n_actions + a` holds the offset of `(s, a)`.
    values: Vec<Vec<f64>>,
}

impl TableBaseline {
    pub fn new(n_actions: usize, values: Vec<Vec<f64>>) -> Result<Self, VdalError> {
        let dim = values.first().map_or(0, Vec::len);
        if n_actions == 0 || !values.len().is_multiple_of(n_actions) || values.iter().any(|v| v.len() != dim) {
            return Err(VdalError::Shape("baseline table is ragged or misaligned".into()));
        }
        Ok(TableBaseline { n_actions, values })
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn get(&self, state: usize, action: usize) -> &[f64] {
        &self.values[state * self.n_actions + action]
    }
}

impl Baseline for TableBaseline {
    fn offsets(&self, pairs: &[(usize, usize)]) -> Result<Tensor, VdalError> {
        let mut data = Vec::with_capacity(pairs.len() * self.dim());
        for &(s, a) in pairs {
            let k = s * self.n_actions + a;
            let row = self
                .values
                .get(k)
                .filter(|_| a < self.n_actions)
                .ok_or_else(|| VdalError::Shape(format!("no baseline for ({s}, {a})")))?;
            data.extend_from_slice(row);
        }
        Ok(Tensor::new(pairs.len(), self.dim(), data)?)
    }
}

#[cfg(test)]
mod tests;
