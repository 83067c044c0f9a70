use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sample_categorical, EnvError, Environment, StepOutcome};

/// One branch of a transition kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub next: usize,
    pub reward: Vec<f64>,
    /// The episode ends after this transition.
    pub terminal: bool,
}

/// A small MDP given by an explicit kernel, for exact backups and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    reward_dim: usize,
    start: usize,
    /// `kernel[s][a]` lists the outcomes of taking `a` in `s`.
    kernel: Vec<Vec<Vec<Outcome>>>,
}

impl FiniteMdp {
    pub fn new(kernel: Vec<Vec<Vec<Outcome>>>, start: usize) -> Result<Self, EnvError> {
        let n_states = kernel.len();
        let n_actions = kernel.first().map_or(0, Vec::len);
        let reward_dim = kernel
            .first()
            .and_then(|a| a.first())
            .and_then(|o| o.first())
            .map_or(0, |o| o.reward.len());
        if n_states == 0 || n_actions == 0 || reward_dim == 0 || start >= n_states {
            return Err(EnvError::InvalidParams("empty kernel or bad start state".into()));
        }
        for (s, row) in kernel.iter().enumerate() {
            if row.len() != n_actions {
                return Err(EnvError::InvalidParams(format!("state {s} has {} actions", row.len())));
            }
            for (a, outs) in row.iter().enumerate() {
                let total: f64 = outs.iter().map(|o| o.prob).sum();
                if outs.is_empty() || (total - 1.0).abs() > 1e-9 {
                    return Err(EnvError::InvalidParams(format!(
                        "kernel at ({s}, {a}) sums to {total}"
                    )));
                }
                if outs
                    .iter()
                    .any(|o| o.next >= n_states || o.reward.len() != reward_dim || o.prob < 0.0)
                {
                    return Err(EnvError::InvalidParams(format!("bad outcome at ({s}, {a})")));
                }
            }
        }
        Ok(FiniteMdp {
            n_states,
            n_actions,
            reward_dim,
            start,
            kernel,
        })
    }

    /// One state, one action, reward `reward` forever.
    pub fn self_loop(reward: f64) -> Self {
        let o = Outcome {
            prob: 1.0,
            next: 0,
            reward: vec![reward],
            terminal: false,
        };
        Self::new(vec![vec![vec![o]]], 0).expect("valid kernel")
    }

    /// A deterministic chain `0 -> 1 -> ... -> n-1` with unit reward on
    /// each step and a terminal step out of the last state. Every action
    /// moves right.
    pub fn chain(n_states: usize, n_actions: usize) -> Self {
        let kernel = (0..n_states)
            .map(|s| {
                (0..n_actions)
                    .map(|_| {
                        vec![Outcome {
                            prob: 1.0,
                            next: (s + 1).min(n_states - 1),
                            reward: vec![1.0],
                            terminal: s + 1 == n_states,
                        }]
                    })
                    .collect()
            })
            .collect();
        Self::new(kernel, 0).expect("valid kernel")
    }

    /// Random dense kernel: each `(s, a)` reaches `branching` distinct
    /// successors with Dirichlet-like weights and rewards uniform in
    /// `[-1, 1]^reward_dim`. No terminal transitions.
    pub fn random(n_states: usize, n_actions: usize, branching: usize, reward_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let branching = branching.clamp(1, n_states);
        let kernel = (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| {
                        let mut states: Vec<usize> = (0..n_states).collect();
                        for i in 0..branching {
                            let j = rng.random_range(i..n_states);
                            states.swap(i, j);
                        }
                        let w: Vec<f64> = (0..branching).map(|_| rng.random_range(0.1..1.0)).collect();
                        let total: f64 = w.iter().sum();
                        states[..branching]
                            .iter()
                            .zip(&w)
                            .map(|(&next, wi)| Outcome {
                                prob: wi / total,
                                next,
                                reward: (0..reward_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                                terminal: false,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(kernel, 0).expect("valid kernel")
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        &self.kernel[state][action]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Replaces every reward by `f(reward, next_state)`; used to fold next
    /// states into the reward vector.
    pub fn map_rewards(&self, f: impl Fn(&[f64], usize) -> Vec<f64>) -> Result<Self, EnvError> {
        let kernel = self
            .kernel
            .iter()
            .map(|row| {
                row.iter()
                    .map(|outs| {
                        outs.iter()
                            .map(|o| Outcome {
                                reward: f(&o.reward, o.next),
                                ..o.clone()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(kernel, self.start)
    }
}

impl Environment for FiniteMdp {
    type State = usize;

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn reward_dim(&self) -> usize {
        self.reward_dim
    }

    fn n_states(&self) -> usize {
        self.n_states
    }

    fn reset(&self) -> usize {
        self.start
    }

    fn step<R: Rng + ?Sized>(&self, state: &usize, action: usize, rng: &mut R) -> Result<StepOutcome<usize>, EnvError> {
        self.check_action(action)?;
        if *state >= self.n_states {
            return Err(EnvError::InvalidState(format!("state {state}")));
        }
        let outs = &self.kernel[*state][action];
        let probs: Vec<f64> = outs.iter().map(|o| o.prob).collect();
        let o = &outs[sample_categorical(&probs, rng)];
        Ok(StepOutcome {
            next_state: o.next,
            reward: o.reward.clone(),
            terminal: o.terminal,
        })
    }

    fn state_index(&self, state: &usize) -> usize {
        *state
    }

    fn state_from_index(&self, index: usize) -> usize {
        index
    }

    /// States placed evenly on `[0, 1]`.
    fn state_features(&self, state: &usize) -> Vec<f64> {
        let d = (self.n_states.max(2) - 1) as f64;
        vec![*state as f64 / d]
    }
}
