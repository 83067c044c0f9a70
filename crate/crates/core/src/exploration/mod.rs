//! Exploration driven by distributional discrepancy: the intrinsic reward
//! of a transition is the size of the generator update it would cause,
//! and next states can be folded into the reward vector so the same
//! generator also models the transition kernel.

mod w1me;

pub use w1me::{
    dqn_baseline, encode_states, w1me_loop, EpisodeLog, ExplorationConfig, StateEncoding, StepRecord, W1meRun,
};

use thiserror::Error;

use crate::bellman_gan::{NextAction, Transition, VdalError, VdalTrainer};
use crate::dqn::DqnError;
use crate::environments::{Discount, EnvError};

#[derive(Debug, Error)]
pub enum ExplorationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Vdal(#[from] VdalError),
}

/// Layout of a reward vector extended with the next state: `reward_dim`
/// discounted components followed by `state_dim` undiscounted ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentedRewardSpec {
    pub reward_dim: usize,
    pub state_dim: usize,
    pub discount: f64,
}

impl AugmentedRewardSpec {
    pub fn total_dim(&self) -> usize {
        self.reward_dim + self.state_dim
    }

    /// `diag(discount * I, 0)`: the state block is never bootstrapped, so
    /// its fixed point is the next-state distribution itself.
    pub fn discount_block(&self) -> Discount {
        let mut d = vec![self.discount; self.reward_dim];
        d.resize(self.total_dim(), 0.0);
        Discount::Diagonal(d)
    }

    pub fn augment(&self, reward: &[f64], next_state: &[f64]) -> Result<Vec<f64>, ExplorationError> {
        if reward.len() != self.reward_dim {
            return Err(ExplorationError::Dimension {
                expected: self.reward_dim,
                got: reward.len(),
            });
        }
        if next_state.len() != self.state_dim {
            return Err(ExplorationError::Dimension {
                expected: self.state_dim,
                got: next_state.len(),
            });
        }
        let mut v = reward.to_vec();
        v.extend_from_slice(next_state);
        Ok(v)
    }
}

/// `reward + eta * intrinsic`.
pub fn combined_reward(reward: f64, intrinsic: f64, eta: f64) -> f64 {
    reward + eta * intrinsic
}

/// Norm of the mean generator-objective gradient over `n_explore` noise
/// draws at `t`, successor actions drawn by `next`, capped at `cap`.
pub fn intrinsic_reward(
    trainer: &mut VdalTrainer,
    t: &Transition,
    next: &dyn NextAction,
    n_explore: usize,
    cap: f64,
) -> Result<f64, ExplorationError> {
    if n_explore == 0 {
        return Err(ExplorationError::Config("n_explore must be positive".into()));
    }
    let norm = trainer.transition_gradient_norm(t, next, n_explore)?;
    // `min` discards a NaN norm in favour of the cap.
    Ok(norm.min(cap))
}
