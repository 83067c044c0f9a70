//! Episodic MDPs with vector-valued rewards.
//!
//! Every environment exposes a finite, indexable state space so the same
//! one-hot encodings, visit counters and tabular oracles work across them.

mod climber;
mod finite;
mod maze;

pub use climber::{Climber, ClimberParams, ClimberState, Face, FaceParams};
pub use finite::{FiniteMdp, Outcome};
pub use maze::{Cell, Maze, MazeAction, MazeLayout, ProbeStates, FOUR_ROOMS, REGION_LABELS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::EmpiricalDistribution;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("cannot step from a terminal state")]
    TerminalState,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("layout line {line}: {msg}")]
    Layout { line: usize, msg: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<S> {
    pub next_state: S,
    pub reward: Vec<f64>,
    pub terminal: bool,
}

pub trait Environment {
    type State: Clone + std::fmt::Debug + PartialEq;

    fn n_actions(&self) -> usize;
    fn reward_dim(&self) -> usize;
    fn n_states(&self) -> usize;
    fn reset(&self) -> Self::State;
    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Result<StepOutcome<Self::State>, EnvError>;
    /// Dense index in `0..n_states()`.
    fn state_index(&self, state: &Self::State) -> usize;
    fn state_from_index(&self, index: usize) -> Self::State;
    /// Real-valued encoding used wherever a state must live in a normed
    /// space, e.g. when next states are folded into the reward vector.
    fn state_features(&self, state: &Self::State) -> Vec<f64>;

    fn feature_dim(&self) -> usize {
        self.state_features(&self.reset()).len()
    }

    fn check_action(&self, action: usize) -> Result<(), EnvError> {
        if action < self.n_actions() {
            Ok(())
        } else {
            Err(EnvError::InvalidAction {
                action,
                n_actions: self.n_actions(),
            })
        }
    }
}

/// Per-component discounting: a scalar `gamma`, or a diagonal matrix so
/// different reward components can be discounted differently.
#[derive(Clone, Debug, PartialEq)]
pub enum Discount {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl Discount {
    pub fn factor(&self, component: usize) -> f64 {
        match self {
            Discount::Scalar(g) => *g,
            Discount::Diagonal(d) => d[component],
        }
    }

    pub fn factors(&self, dim: usize) -> Vec<f64> {
        (0..dim).map(|i| self.factor(i)).collect()
    }

    /// Largest factor, the contraction modulus of the backup.
    pub fn modulus(&self) -> f64 {
        match self {
            Discount::Scalar(g) => *g,
            Discount::Diagonal(d) => d.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// A stochastic policy over a finite state space.
pub trait Policy {
    fn n_actions(&self) -> usize;
    /// Action probabilities at a state index.
    fn probabilities(&self, state: usize) -> Vec<f64>;

    fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_categorical(&self.probabilities(state), rng)
    }
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformPolicy {
    pub n_actions: usize,
}

impl Policy for UniformPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn probabilities(&self, _state: usize) -> Vec<f64> {
        vec![1.0 / self.n_actions as f64; self.n_actions]
    }

    fn sample<R: Rng + ?Sized>(&self, _state: usize, rng: &mut R) -> usize {
        rng.random_range(0..self.n_actions)
    }
}

/// Explicit per-state action distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    pub table: Vec<Vec<f64>>,
}

impl Policy for TabularPolicy {
    fn n_actions(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    fn probabilities(&self, state: usize) -> Vec<f64> {
        self.table[state].clone()
    }
}

/// How [`monte_carlo_returns`] rolls out: discounting, a step cap, the
/// number of rollouts and the RNG seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollouts {
    pub discount: Discount,
    pub horizon: usize,
    pub count: usize,
    pub seed: u64,
}

/// Truncated discounted returns of rollouts that start by taking `action`
/// in `start` and then follow `policy`. Rollouts stop at terminal states or
/// after `horizon` steps.
pub fn monte_carlo_returns<E: Environment, P: Policy>(
    env: &E,
    policy: &P,
    start: &E::State,
    action: usize,
    spec: &Rollouts,
) -> Result<EmpiricalDistribution, EnvError> {
    if spec.count == 0 {
        return Err(EnvError::InvalidParams("at least one rollout is required".into()));
    }
    let m = env.reward_dim();
    let factors = spec.discount.factors(m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mut total = vec![0.0; m];
        let mut scale = vec![1.0; m];
        let mut state = start.clone();
        let mut a = action;
        for _ in 0..spec.horizon {
            let out = env.step(&state, a, &mut rng)?;
            for k in 0..m {
                total[k] += scale[k] * out.reward[k];
                scale[k] *= factors[k];
            }
            if out.terminal {
                break;
            }
            state = out.next_state;
            a = policy.sample(env.state_index(&state), &mut rng);
        }
        samples.push(total);
    }
    EmpiricalDistribution::uniform(samples).map_err(|e| EnvError::InvalidParams(e.to_string()))
}
