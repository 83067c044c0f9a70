//! Fully connected networks built on [`crate::autodiff`]: the conditional
//! generator, the critic and the Q-network trunk.

mod gan_nets;
mod mlp;
mod params;

pub use gan_nets::{
    BoundCritic, BoundGenerator, CriticNet, CriticSpec, GeneratorNet, GeneratorSpec,
};
pub use mlp::{Activation, BoundMlp, Linear, Mlp, MlpSpec};
pub use params::{flatten, load_params, save_params, ParamEntry, ParamFile};

use thiserror::Error;

use crate::autodiff::{AutodiffError, Tensor};

/// Leaky-ReLU slope used throughout.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("input width {got} does not match the network's {expected}")]
    InputWidth { expected: usize, got: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("parameter file does not match the network: {0}")]
    ParamMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parameter file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Anything holding an ordered list of trainable tensors.
pub trait Module {
    fn parameters(&self) -> Vec<&Tensor>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;
    fn parameter_names(&self) -> Vec<String>;

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }
}

/// One-hot rows for discrete `(state, action)` pairs: state block first,
/// action block second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneHotEncoder {
    pub n_states: usize,
    pub n_actions: usize,
}

impl OneHotEncoder {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        OneHotEncoder {
            n_states,
            n_actions,
        }
    }

    pub fn width(&self) -> usize {
        self.n_states + self.n_actions
    }

    pub fn encode(&self, pairs: &[(usize, usize)]) -> Tensor {
        let w = self.width();
        let mut t = Tensor::zeros(pairs.len(), w);
        for (i, &(s, a)) in pairs.iter().enumerate() {
            assert!(s < self.n_states && a < self.n_actions, "({s}, {a}) outside encoder range");
            t.set(i, s, 1.0);
            t.set(i, self.n_states + a, 1.0);
        }
        t
    }
}
