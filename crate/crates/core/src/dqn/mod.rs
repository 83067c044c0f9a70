//! Double DQN with an action-as-input Q-network, Huber loss and
//! epsilon-greedy behaviour, plus a vector-valued evaluation variant
//! that learns `Q^pi` for a fixed policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamConfig, AdamState, AutodiffError, Graph, Tensor, Var};
use crate::bellman_gan::{Baseline, VdalError};
use crate::environments::Policy;
use crate::neural::{Activation, BoundMlp, Mlp, MlpSpec, Module, NeuralError};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("transition does not fit the network: {0}")]
    Shape(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub discount: f64,
    /// Probability of a uniformly random action.
    pub epsilon: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Updates between hard copies of the online net into the target net.
    pub target_sync: usize,
    pub huber_delta: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            discount: 0.9,
            epsilon: 0.05,
            adam: AdamConfig::default(),
            batch_size: 64,
            target_sync: 100,
            huber_delta: 1.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(DqnError::Config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(DqnError::Config(format!("discount {} outside [0, 1)", self.discount)));
        }
        if self.batch_size == 0 || self.target_sync == 0 || self.huber_delta <= 0.0 {
            return Err(DqnError::Config("batch size, sync interval and delta must be positive".into()));
        }
        Ok(())
    }
}

/// `Q(s, a)` as an MLP over `state ++ one_hot(a)`, with ReLU hidden
/// layers and a linear output multiplied by `value_scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    mlp: Mlp,
    state_dim: usize,
    n_actions: usize,
    value_scale: f64,
}

impl QNetwork {
    pub fn new(
        state_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        output_dim: usize,
        seed: u64,
    ) -> Result<Self, DqnError> {
        if n_actions == 0 {
            return Err(DqnError::Config("need at least one action".into()));
        }
        let mut widths = hidden.to_vec();
        widths.push(output_dim);
        let spec = MlpSpec {
            input_dim: state_dim + n_actions,
            layer_widths: widths,
            activation: Activation::Relu,
            output_activation: Activation::Linear,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(QNetwork {
            mlp: Mlp::new(spec, &mut rng)?,
            state_dim,
            n_actions,
            value_scale: 1.0,
        })
    }

    /// Outputs are `value_scale` times the raw network output, so large
    /// returns need not be produced by large weights.
    pub fn with_value_scale(mut self, scale: f64) -> Self {
        self.value_scale = scale;
        self
    }

    pub fn value_scale(&self) -> f64 {
        self.value_scale
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn inputs(&self, rows: &[(&[f64], usize)]) -> Result<Tensor, DqnError> {
        let width = self.state_dim + self.n_actions;
        let mut data = Vec::with_capacity(rows.len() * width);
        for &(s, a) in rows {
            if s.len() != self.state_dim || a >= self.n_actions {
                return Err(DqnError::Shape(format!(
                    "state of length {} and action {a} for a net over {} dims and {} actions",
                    s.len(),
                    self.state_dim,
                    self.n_actions
                )));
            }
            data.extend_from_slice(s);
            data.extend((0..self.n_actions).map(|k| if k == a { 1.0 } else { 0.0 }));
        }
        Ok(Tensor::new(rows.len(), width, data)?)
    }

    /// One output row per `(state, action)`.
    pub fn evaluate(&self, rows: &[(&[f64], usize)]) -> Result<Tensor, DqnError> {
        let out = self.mlp.eval(&self.inputs(rows)?)?;
        Ok(out.map(|v| v * self.value_scale))
    }

    /// First output component for every action at `state`.
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, DqnError> {
        let rows: Vec<(&[f64], usize)> = (0..self.n_actions).map(|a| (state, a)).collect();
        let out = self.evaluate(&rows)?;
        Ok((0..self.n_actions).map(|a| out.get(a, 0)).collect())
    }

    pub fn bind<'g>(&self, graph: &'g Graph, trainable: bool) -> BoundQ<'g> {
        BoundQ {
            mlp: self.mlp.bind(graph, trainable),
            value_scale: self.value_scale,
        }
    }
}

impl Module for QNetwork {
    fn parameters(&self) -> Vec<&Tensor> {
        self.mlp.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.mlp.parameters_mut()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.mlp.parameter_names()
    }
}

#[derive(Clone, Debug)]
pub struct BoundQ<'g> {
    mlp: BoundMlp<'g>,
    value_scale: f64,
}

impl<'g> BoundQ<'g> {
    pub fn forward(&self, inputs: Var<'g>) -> Result<Var<'g>, DqnError> {
        Ok(self.mlp.forward(inputs)?.scale(self.value_scale))
    }

    pub fn params(&self) -> Vec<Var<'g>> {
        self.mlp.params()
    }
}

/// Index of the largest value, the lowest index among ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform action, else the greedy one.
/// Always consumes exactly one uniform draw, plus one more when exploring.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    q: &QNetwork,
    state: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, DqnError> {
    if rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..q.n_actions()))
    } else {
        Ok(argmax(&q.q_values(state)?))
    }
}

/// A transition over encoded states. `next_action` is only read by the
/// evaluation rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTransition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: Vec<f64>,
    pub next_state: Vec<f64>,
    pub next_action: usize,
    pub terminal: bool,
}

/// How the bootstrap target is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetRule {
    /// `r + gamma * Q_target(s', argmax_a Q_online(s', a))`, scalar rewards.
    DoubleQ,
    /// `r + gamma * Q_target(s', a')` with the stored `a'`; any output width.
    Evaluation,
}

/// Double-DQN bootstrap target of one transition.
pub fn ddqn_target(
    online: &QNetwork,
    target: &QNetwork,
    t: &QTransition,
    discount: f64,
) -> Result<f64, DqnError> {
    let r = *t
        .reward
        .first()
        .ok_or_else(|| DqnError::Shape("empty reward".into()))?;
    if t.terminal {
        return Ok(r);
    }
    let a_star = argmax(&online.q_values(&t.next_state)?);
    let q = target.evaluate(&[(&t.next_state, a_star)])?;
    Ok(r + discount * q.get(0, 0))
}

fn targets(
    online: &QNetwork,
    target: &QNetwork,
    batch: &[&QTransition],
    rule: TargetRule,
    discount: f64,
) -> Result<Tensor, DqnError> {
    let m = online.output_dim();
    let mut data = Vec::with_capacity(batch.len() * m);
    match rule {
        TargetRule::DoubleQ => {
            if m != 1 {
                return Err(DqnError::Shape("double-Q targets need a scalar network".into()));
            }
            let n = online.n_actions();
            let every: Vec<(&[f64], usize)> = batch
                .iter()
                .flat_map(|t| (0..n).map(move |a| (t.next_state.as_slice(), a)))
                .collect();
            let scores = online.evaluate(&every)?;
            let chosen: Vec<(&[f64], usize)> = batch
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let row: Vec<f64> = (0..n).map(|a| scores.get(i * n + a, 0)).collect();
                    (t.next_state.as_slice(), argmax(&row))
                })
                .collect();
            let ahead = target.evaluate(&chosen)?;
            for (i, t) in batch.iter().enumerate() {
                let r = *t
                    .reward
                    .first()
                    .ok_or_else(|| DqnError::Shape("empty reward".into()))?;
                data.push(if t.terminal { r } else { r + discount * ahead.get(i, 0) });
            }
        }
        TargetRule::Evaluation => {
            let rows: Vec<(&[f64], usize)> = batch.iter().map(|t| (t.next_state.as_slice(), t.next_action)).collect();
            let ahead = target.evaluate(&rows)?;
            for (i, t) in batch.iter().enumerate() {
                if t.reward.len() != m {
                    return Err(DqnError::Shape(format!("reward of length {}, expected {m}", t.reward.len())));
                }
                let keep = if t.terminal { 0.0 } else { discount };
                data.extend((0..m).map(|c| t.reward[c] + keep * ahead.get(i, c)));
            }
        }
    }
    Ok(Tensor::new(batch.len(), m, data)?)
}

/// Online and target networks with their optimizer.
#[derive(Clone, Debug)]
pub struct DqnAgent {
    config: DqnConfig,
    online: QNetwork,
    target: QNetwork,
    opt: AdamState,
    updates: usize,
}

impl DqnAgent {
    pub fn new(config: DqnConfig, net: QNetwork) -> Result<Self, DqnError> {
        config.validate()?;
        let opt = AdamState::new(config.adam, net.parameters());
        Ok(DqnAgent {
            config,
            target: net.clone(),
            online: net,
            opt,
            updates: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<usize, DqnError> {
        epsilon_greedy(&self.online, state, self.config.epsilon, rng)
    }

    /// One Adam step on the mean Huber loss against `rule` targets;
    /// returns the loss before the step.
    pub fn update(&mut self, batch: &[&QTransition], rule: TargetRule) -> Result<f64, DqnError> {
        if batch.is_empty() {
            return Err(DqnError::EmptyBatch);
        }
        let goal = targets(&self.online, &self.target, batch, rule, self.config.discount)?;
        let rows: Vec<(&[f64], usize)> = batch.iter().map(|t| (t.state.as_slice(), t.action)).collect();
        let inputs = self.online.inputs(&rows)?;

        let g = Graph::new();
        let q = self.online.bind(&g, true);
        let loss = q
            .forward(g.constant(inputs))?
            .huber(g.constant(goal), self.config.huber_delta)?;
        let grads = g.backward(loss)?.collect(&q.params());
        self.opt.step(self.online.parameters_mut(), &grads)?;

        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync) {
            self.target = self.online.clone();
        }
        Ok(loss.item()?)
    }
}

/// The behaviour policy of a Q-network over indexed states, with
/// `encoding[s]` as the network input for state `s`.
pub struct EpsilonGreedyPolicy<'q> {
    net: &'q QNetwork,
    encoding: &'q [Vec<f64>],
    epsilon: f64,
}

impl<'q> EpsilonGreedyPolicy<'q> {
    pub fn new(net: &'q QNetwork, encoding: &'q [Vec<f64>], epsilon: f64) -> Result<Self, DqnError> {
        if let Some(bad) = encoding.iter().find(|e| e.len() != net.state_dim()) {
            return Err(DqnError::Shape(format!(
                "state encoding of length {}, network expects {}",
                bad.len(),
                net.state_dim()
            )));
        }
        Ok(EpsilonGreedyPolicy { net, encoding, epsilon })
    }
}

impl Policy for EpsilonGreedyPolicy<'_> {
    fn n_actions(&self) -> usize {
        self.net.n_actions()
    }

    fn probabilities(&self, state: usize) -> Vec<f64> {
        let n = self.net.n_actions();
        let q = self.net.q_values(&self.encoding[state]).expect("encodings checked at construction");
        let best = argmax(&q);
        (0..n)
            .map(|a| self.epsilon / n as f64 + if a == best { 1.0 - self.epsilon } else { 0.0 })
            .collect()
    }
}

/// A Q-network read as per-pair offsets for the generator, with states
/// encoded by `encoding[s]`.
pub struct QBaseline<'q> {
    pub net: &'q QNetwork,
    pub encoding: &'q [Vec<f64>],
}

impl Baseline for QBaseline<'_> {
    fn offsets(&self, pairs: &[(usize, usize)]) -> Result<Tensor, VdalError> {
        let mut rows = Vec::with_capacity(pairs.len());
        for &(s, a) in pairs {
            let state = self
                .encoding
                .get(s)
                .ok_or_else(|| VdalError::Shape(format!("no encoding for state {s}")))?;
            rows.push((state.as_slice(), a));
        }
        self.net
            .evaluate(&rows)
            .map_err(|e| VdalError::Shape(e.to_string()))
    }
}
