use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::losses::{critic_loss, generated_pair, generator_loss, Batch};
use super::{ReplayPool, Transition, VdalError};
use crate::autodiff::{AdamConfig, AdamState, Graph, Tensor};
use crate::environments::{Discount, Policy};
use crate::neural::{CriticNet, GeneratorNet, Module, OneHotEncoder};

#[derive(Clone, Debug, PartialEq)]
pub struct VdalConfig {
    pub discount: Discount,
    /// Gradient-penalty coefficient.
    pub penalty: f64,
    /// Critic steps per generator step.
    pub n_critic: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Generator steps between copies into a frozen generator that feeds
    /// the backed-up branch. `None` uses the live generator for both.
    pub target_sync: Option<usize>,
}

impl VdalConfig {
    pub fn new(discount: Discount) -> Self {
        VdalConfig {
            discount,
            penalty: 0.1,
            n_critic: 5,
            batch_size: 64,
            adam: AdamConfig::default(),
            target_sync: None,
        }
    }

    pub fn validate(&self) -> Result<(), VdalError> {
        let bad = |m: &str| Err(VdalError::Config(m.to_string()));
        let gammas_ok = match &self.discount {
            Discount::Scalar(g) => (0.0..1.0).contains(g),
            Discount::Diagonal(d) => d.iter().all(|g| (0.0..1.0).contains(g)),
        };
        if !gammas_ok {
            return bad("discount factors must lie in [0, 1)");
        }
        if self.penalty < 0.0 {
            return bad("penalty must be nonnegative");
        }
        if self.n_critic == 0 || self.batch_size == 0 {
            return bad("n_critic and batch_size must be positive");
        }
        Ok(())
    }
}

/// Where the successor action of a replayed transition comes from.
pub trait NextAction {
    fn next_action(&self, t: &Transition, rng: &mut ChaCha8Rng) -> usize;
}

/// Reuses the action stored with the transition.
pub struct StoredNextAction;

impl NextAction for StoredNextAction {
    fn next_action(&self, t: &Transition, _rng: &mut ChaCha8Rng) -> usize {
        t.next_action
    }
}

/// Redraws the successor action from a (possibly changed) policy.
pub struct ResampledNextAction<'p, P: Policy>(pub &'p P);

impl<P: Policy> NextAction for ResampledNextAction<'_, P> {
    fn next_action(&self, t: &Transition, rng: &mut ChaCha8Rng) -> usize {
        self.0.sample(t.next_state, rng)
    }
}

/// A per-pair constant added to generated samples, letting the generator
/// model only the spread around a separately learned value.
pub trait Baseline {
    fn offsets(&self, pairs: &[(usize, usize)]) -> Result<Tensor, VdalError>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub penalty_mean: f64,
    /// Critic estimate of the distance between the two branches.
    pub distance: f64,
}

/// Generator, critic, their optimizers and the RNG stream that drives
/// minibatches and noise.
#[derive(Clone, Debug)]
pub struct VdalTrainer {
    config: VdalConfig,
    encoder: OneHotEncoder,
    generator: GeneratorNet,
    critic: CriticNet,
    target: Option<GeneratorNet>,
    gen_opt: AdamState,
    critic_opt: AdamState,
    rng: ChaCha8Rng,
    iteration: usize,
    generator_steps: usize,
}

impl VdalTrainer {
    pub fn new(
        config: VdalConfig,
        encoder: OneHotEncoder,
        generator: GeneratorNet,
        critic: CriticNet,
        seed: u64,
    ) -> Result<Self, VdalError> {
        config.validate()?;
        if generator.cond_dim() != encoder.width() || critic.spec().cond_dim != encoder.width() {
            return Err(VdalError::Config(format!(
                "networks expect conditions of width {} and {}, encoder gives {}",
                generator.cond_dim(),
                critic.spec().cond_dim,
                encoder.width()
            )));
        }
        if generator.output_dim() != critic.sample_dim() {
            return Err(VdalError::Config("generator output and critic input differ".into()));
        }
        let gen_opt = AdamState::new(config.adam, generator.parameters());
        let critic_opt = AdamState::new(config.adam, critic.parameters());
        let target = config.target_sync.map(|_| generator.clone());
        Ok(VdalTrainer {
            config,
            encoder,
            generator,
            critic,
            target,
            gen_opt,
            critic_opt,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            generator_steps: 0,
        })
    }

    pub fn config(&self) -> &VdalConfig {
        &self.config
    }

    pub fn generator(&self) -> &GeneratorNet {
        &self.generator
    }

    pub fn critic(&self) -> &CriticNet {
        &self.critic
    }

    pub fn encoder(&self) -> &OneHotEncoder {
        &self.encoder
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Changes the step size of both optimizers, keeping their moments.
    pub fn set_learning_rate(&mut self, learning_rate: f64) {
        self.config.adam.learning_rate = learning_rate;
        self.gen_opt.config.learning_rate = learning_rate;
        self.critic_opt.config.learning_rate = learning_rate;
    }

    pub fn reward_dim(&self) -> usize {
        self.generator.output_dim()
    }

    pub fn noise(&mut self, rows: usize) -> Tensor {
        let d = self.generator.noise_dim();
        let data = (0..rows * d).map(|_| self.rng.sample(StandardNormal)).collect();
        Tensor::new(rows, d, data).expect("sized")
    }

    /// Lays out transitions as a minibatch, with successor actions from
    /// `next` and constants from `baseline`.
    pub fn batch(
        &mut self,
        transitions: &[&Transition],
        next: &dyn NextAction,
        baseline: Option<&dyn Baseline>,
    ) -> Result<Batch, VdalError> {
        let m = self.reward_dim();
        let factors = self.config.discount.factors(m);
        let pairs: Vec<(usize, usize)> = transitions.iter().map(|t| (t.state, t.action)).collect();
        let next_pairs: Vec<(usize, usize)> = transitions
            .iter()
            .map(|t| {
                let a = if t.terminal { 0 } else { next.next_action(t, &mut self.rng) };
                (t.next_state, a)
            })
            .collect();
        let mut reward = Vec::with_capacity(transitions.len() * m);
        let mut next_scale = Vec::with_capacity(transitions.len() * m);
        for t in transitions {
            if t.reward.len() != m {
                return Err(VdalError::Shape(format!("reward of length {}, expected {m}", t.reward.len())));
            }
            reward.extend_from_slice(&t.reward);
            next_scale.extend(factors.iter().map(|g| if t.terminal { 0.0 } else { *g }));
        }
        let b = transitions.len();
        let (offset, next_offset) = match baseline {
            Some(bl) => (bl.offsets(&pairs)?, bl.offsets(&next_pairs)?),
            None => (Tensor::zeros(b, m), Tensor::zeros(b, m)),
        };
        Ok(Batch {
            cond: self.encoder.encode(&pairs),
            next_cond: self.encoder.encode(&next_pairs),
            reward: Tensor::new(b, m, reward)?,
            next_scale: Tensor::new(b, m, next_scale)?,
            offset,
            next_offset,
        })
    }

    fn sample_batch(
        &mut self,
        pool: &ReplayPool,
        next: &dyn NextAction,
        baseline: Option<&dyn Baseline>,
    ) -> Result<Batch, VdalError> {
        if pool.is_empty() {
            return Err(VdalError::EmptyPool);
        }
        let idx = pool.sample_indices(self.config.batch_size, &mut self.rng);
        let items: Vec<&Transition> = idx.iter().map(|&i| pool.get(i).expect("in range")).collect();
        self.batch(&items, next, baseline)
    }

    /// One critic update on a fresh minibatch; returns (loss, distance,
    /// mean penalty).
    pub fn critic_step(
        &mut self,
        pool: &ReplayPool,
        next: &dyn NextAction,
        baseline: Option<&dyn Baseline>,
    ) -> Result<(f64, f64, f64), VdalError> {
        let batch = self.sample_batch(pool, next, baseline)?;
        let b = batch.len();
        let z = self.noise(b);
        let z_next = self.noise(b);
        let eps: Vec<f64> = (0..b).map(|_| self.rng.random::<f64>()).collect();
        let g = Graph::new();
        let gen = self.generator.bind(&g, false);
        let next_gen = match &self.target {
            Some(t) => t.bind(&g, false),
            None => gen.clone(),
        };
        let (x, x_next) = generated_pair(&gen, &next_gen, &batch, g.constant(z), g.constant(z_next))?;
        let critic = self.critic.bind(&g, true);
        let terms = critic_loss(&critic, &batch.cond, x, x_next, &eps, self.config.penalty)?;
        let grads = g.backward(terms.loss)?.collect(&critic.params());
        self.critic_opt.step(self.critic.parameters_mut(), &grads)?;
        Ok((terms.loss.item()?, terms.distance, terms.penalty_mean))
    }

    /// One generator update on a fresh minibatch; returns the loss.
    pub fn generator_step(
        &mut self,
        pool: &ReplayPool,
        next: &dyn NextAction,
        baseline: Option<&dyn Baseline>,
    ) -> Result<f64, VdalError> {
        let batch = self.sample_batch(pool, next, baseline)?;
        let b = batch.len();
        let z = self.noise(b);
        let z_next = self.noise(b);
        let g = Graph::new();
        let gen = self.generator.bind(&g, true);
        let next_gen = match &self.target {
            Some(t) => t.bind(&g, false),
            None => gen.clone(),
        };
        let (x, x_next) = generated_pair(&gen, &next_gen, &batch, g.constant(z), g.constant(z_next))?;
        let critic = self.critic.bind(&g, false);
        let loss = generator_loss(&critic, &batch.cond, x, x_next)?;
        let grads = g.backward(loss)?.collect(&gen.params());
        self.gen_opt.step(self.generator.parameters_mut(), &grads)?;
        self.generator_steps += 1;
        if let (Some(every), Some(target)) = (self.config.target_sync, self.target.as_mut()) {
            if self.generator_steps.is_multiple_of(every.max(1)) {
                *target = self.generator.clone();
            }
        }
        Ok(loss.item()?)
    }

    /// `n_critic` critic updates followed by one generator update.
    pub fn train_iteration(
        &mut self,
        pool: &ReplayPool,
        next: &dyn NextAction,
        baseline: Option<&dyn Baseline>,
    ) -> Result<IterationStats, VdalError> {
        let mut stats = IterationStats::default();
        for _ in 0..self.config.n_critic {
            let (loss, distance, penalty) = self.critic_step(pool, next, baseline)?;
            stats.critic_loss = loss;
            stats.distance = distance;
            stats.penalty_mean = penalty;
        }
        stats.generator_loss = self.generator_step(pool, next, baseline)?;
        self.iteration += 1;
        stats.iteration = self.iteration;
        Ok(stats)
    }

    /// Gradient of the generator objective `mean(f(x') - f(x))` with
    /// respect to every generator parameter, critic held fixed, for
    /// given noise.
    pub fn objective_gradient(
        &self,
        batch: &Batch,
        z: &Tensor,
        z_next: &Tensor,
    ) -> Result<Vec<Tensor>, VdalError> {
        let g = Graph::new();
        let gen = self.generator.bind(&g, true);
        let next_gen = match &self.target {
            Some(t) => t.bind(&g, false),
            None => gen.clone(),
        };
        let (x, x_next) = generated_pair(&gen, &next_gen, batch, g.constant(z.clone()), g.constant(z_next.clone()))?;
        let loss = generator_loss(&self.critic.bind(&g, false), &batch.cond, x, x_next)?;
        Ok(g.backward(loss)?.collect(&gen.params()))
    }

    /// Norm of the mean objective gradient over `draws` copies of one
    /// transition, each with its own noise pair and successor action.
    pub fn transition_gradient_norm(
        &mut self,
        t: &Transition,
        next: &dyn NextAction,
        draws: usize,
    ) -> Result<f64, VdalError> {
        let copies = vec![t; draws.max(1)];
        let batch = self.batch(&copies, next, None)?;
        let z = self.noise(copies.len());
        let z_next = self.noise(copies.len());
        let grads = self.objective_gradient(&batch, &z, &z_next)?;
        Ok(grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt())
    }

    /// `n` samples per pair, rows grouped by pair.
    pub fn sample(
        &mut self,
        pairs: &[(usize, usize)],
        n: usize,
        baseline: Option<&dyn Baseline>,
    ) -> Result<Tensor, VdalError> {
        let rows: Vec<(usize, usize)> = pairs.iter().flat_map(|p| std::iter::repeat_n(*p, n)).collect();
        let z = self.noise(rows.len());
        let mut out = self.generator.sample(&self.encoder.encode(&rows), &z)?;
        if let Some(bl) = baseline {
            let off = bl.offsets(&rows)?;
            out = out.zip_map(&off, "offset", |a, b| a + b)?;
        }
        Ok(out)
    }

    /// The generator's outputs as a table of empirical distributions.
    pub fn tabular_z(
        &mut self,
        n_states: usize,
        n_actions: usize,
        samples_per_pair: usize,
        baseline: Option<&dyn Baseline>,
    ) -> Result<crate::metrics::TabularZ, VdalError> {
        let pairs: Vec<(usize, usize)> = (0..n_states)
            .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
            .collect();
        let all = self.sample(&pairs, samples_per_pair, baseline)?;
        let m = all.cols();
        Ok(crate::metrics::TabularZ::from_fn(n_states, n_actions, |s, a| {
            let k = s * n_actions + a;
            let rows = (k * samples_per_pair..(k + 1) * samples_per_pair)
                .map(|r| all.row_slice(r)[..m].to_vec())
                .collect();
            crate::metrics::EmpiricalDistribution::uniform(rows).expect("non-empty")
        }))
    }
}

/// Wall-clock stopwatch for the optional timing column.
#[derive(Clone, Copy, Debug)]
pub struct Stopwatch {
    start: Instant,
    enabled: bool,
}

impl Stopwatch {
    pub fn new(enabled: bool) -> Self {
        Stopwatch {
            start: Instant::now(),
            enabled,
        }
    }

    /// Milliseconds since creation, or 0 when disabled so logs stay
    /// byte-for-byte reproducible.
    pub fn elapsed_ms(&self) -> u64 {
        if self.enabled {
            self.start.elapsed().as_millis() as u64
        } else {
            0
        }
    }
}
