use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{combined_reward, intrinsic_reward, AugmentedRewardSpec, ExplorationError};
use crate::bellman_gan::{ReplayPool, ResampledNextAction, Transition, VdalTrainer};
use crate::dqn::{DqnAgent, EpsilonGreedyPolicy, QTransition, TargetRule};
use crate::environments::{Environment, Policy};

/// How states are presented to the Q-network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateEncoding {
    /// Indicator of the state index.
    OneHot,
    /// The environment's real-valued features.
    Features,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationConfig {
    pub q_encoding: StateEncoding,
    /// Weight of the intrinsic reward.
    pub eta: f64,
    /// Noise draws averaged per intrinsic reward.
    pub n_explore: usize,
    /// Environment steps collected between learning phases.
    pub steps_per_round: usize,
    /// Upper bound on a single intrinsic reward.
    pub intrinsic_cap: f64,
    pub episodes: usize,
    /// Episodes are cut (not terminated) after this many steps.
    pub max_episode_steps: usize,
    pub dqn_updates_per_round: usize,
    pub vdal_iterations_per_round: usize,
    /// Stored transitions required before any learning.
    pub warmup: usize,
    pub replay_capacity: usize,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            q_encoding: StateEncoding::OneHot,
            eta: 0.0,
            n_explore: 4,
            steps_per_round: 32,
            intrinsic_cap: 100.0,
            episodes: 300,
            max_episode_steps: 500,
            dqn_updates_per_round: 32,
            vdal_iterations_per_round: 4,
            warmup: 64,
            replay_capacity: 100_000,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<(), ExplorationError> {
        let bad = |m: &str| Err(ExplorationError::Config(m.to_string()));
        if self.eta < 0.0 || self.eta.is_nan() {
            return bad("eta must be nonnegative");
        }
        if self.n_explore == 0 || self.steps_per_round == 0 || self.max_episode_steps == 0 {
            return bad("n_explore, steps_per_round and max_episode_steps must be positive");
        }
        if self.intrinsic_cap.is_nan() || self.intrinsic_cap < 0.0 {
            return bad("intrinsic_cap must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Undiscounted sum of extrinsic rewards.
    pub extrinsic_return: f64,
    pub mean_intrinsic: f64,
    pub steps: usize,
}

/// What the agent did at one step, for trajectory comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub combined: f64,
}

#[derive(Clone, Debug)]
pub struct W1meRun {
    pub episodes: Vec<EpisodeLog>,
    /// Steps taken from each state index.
    pub visits: Vec<u64>,
    pub trajectory: Vec<StepRecord>,
    pub agent: DqnAgent,
    pub trainer: Option<VdalTrainer>,
}

/// Network input for every state index.
pub fn encode_states<E: Environment>(env: &E, encoding: StateEncoding) -> Vec<Vec<f64>> {
    let n = env.n_states();
    (0..n)
        .map(|s| match encoding {
            StateEncoding::OneHot => (0..n).map(|k| if k == s { 1.0 } else { 0.0 }).collect(),
            StateEncoding::Features => env.state_features(&env.state_from_index(s)),
        })
        .collect()
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Alternates collection with DQN updates on the combined reward and,
/// when a trainer is given, generator training on the next-state
/// augmented rewards.
///
/// Every source of randomness feeding the agent's trajectory has its own
/// stream, and the generator side draws only from the trainer's RNG, so
/// with `eta = 0` the trajectory does not depend on the trainer at all.
pub fn w1me_loop<E: Environment>(
    env: &E,
    mut agent: DqnAgent,
    mut trainer: Option<VdalTrainer>,
    config: &ExplorationConfig,
    seed: u64,
) -> Result<W1meRun, ExplorationError> {
    config.validate()?;
    if env.reward_dim() != 1 {
        return Err(ExplorationError::Dimension {
            expected: 1,
            got: env.reward_dim(),
        });
    }
    let n_states = env.n_states();
    let encoding = encode_states(env, config.q_encoding);
    if agent.online().state_dim() != encoding[0].len() || agent.online().n_actions() != env.n_actions() {
        return Err(ExplorationError::Config("Q-network does not match the environment".into()));
    }
    let augment = AugmentedRewardSpec {
        reward_dim: 1,
        state_dim: env.feature_dim(),
        discount: agent.config().discount,
    };
    if let Some(t) = &trainer {
        if t.reward_dim() != augment.total_dim() {
            return Err(ExplorationError::Dimension {
                expected: augment.total_dim(),
                got: t.reward_dim(),
            });
        }
    }

    let mut env_rng = stream(seed, 1);
    let mut act_rng = stream(seed, 2);
    let mut replay_rng = stream(seed, 3);
    let mut aux_rng = stream(seed, 4);

    let mut q_pool: ReplayPool<QTransition> = ReplayPool::new(config.replay_capacity);
    let mut gan_pool: ReplayPool<Transition> = ReplayPool::new(config.replay_capacity);
    let mut visits = vec![0u64; n_states];
    let mut trajectory = Vec::new();
    let mut episodes = Vec::with_capacity(config.episodes);

    let mut state = env.reset();
    let (mut ep_return, mut ep_intrinsic, mut ep_steps) = (0.0, 0.0, 0usize);

    while episodes.len() < config.episodes {
        for _ in 0..config.steps_per_round {
            let s = env.state_index(&state);
            let action = agent.act(&encoding[s], &mut act_rng)?;
            let out = env.step(&state, action, &mut env_rng)?;
            let s_next = env.state_index(&out.next_state);
            let reward = out.reward[0];
            visits[s] += 1;

            let mut intrinsic = 0.0;
            if let Some(tr) = trainer.as_mut() {
                let policy = EpsilonGreedyPolicy::new(agent.online(), &encoding, agent.config().epsilon)?;
                let transition = Transition {
                    state: s,
                    action,
                    reward: augment.augment(&out.reward, &env.state_features(&out.next_state))?,
                    next_state: s_next,
                    next_action: if out.terminal { 0 } else { policy.sample(s_next, &mut aux_rng) },
                    terminal: out.terminal,
                };
                intrinsic =
                    intrinsic_reward(tr, &transition, &ResampledNextAction(&policy), config.n_explore, config.intrinsic_cap)?;
                gan_pool.push(transition);
            }
            let combined = combined_reward(reward, intrinsic, config.eta);
            q_pool.push(QTransition {
                state: encoding[s].clone(),
                action,
                reward: vec![combined],
                next_state: encoding[s_next].clone(),
                next_action: 0,
                terminal: out.terminal,
            });
            trajectory.push(StepRecord {
                state: s,
                action,
                reward,
                combined,
            });

            ep_return += reward;
            ep_intrinsic += intrinsic;
            ep_steps += 1;
            if out.terminal || ep_steps >= config.max_episode_steps {
                episodes.push(EpisodeLog {
                    episode: episodes.len(),
                    extrinsic_return: ep_return,
                    mean_intrinsic: ep_intrinsic / ep_steps as f64,
                    steps: ep_steps,
                });
                state = env.reset();
                (ep_return, ep_intrinsic, ep_steps) = (0.0, 0.0, 0);
                if episodes.len() >= config.episodes {
                    break;
                }
            } else {
                state = out.next_state;
            }
        }

        if q_pool.len() >= config.warmup.max(1) {
            for _ in 0..config.dqn_updates_per_round {
                let batch = q_pool.sample(agent.config().batch_size, &mut replay_rng);
                agent.update(&batch, TargetRule::DoubleQ)?;
            }
        }
        if let Some(tr) = trainer.as_mut() {
            if gan_pool.len() >= config.warmup.max(1) {
                let policy = EpsilonGreedyPolicy::new(agent.online(), &encoding, agent.config().epsilon)?;
                for _ in 0..config.vdal_iterations_per_round {
                    tr.train_iteration(&gan_pool, &ResampledNextAction(&policy), None)?;
                }
            }
        }
    }

    Ok(W1meRun {
        episodes,
        visits,
        trajectory,
        agent,
        trainer,
    })
}

/// DQN with epsilon-greedy exploration and no generator.
pub fn dqn_baseline<E: Environment>(
    env: &E,
    agent: DqnAgent,
    config: &ExplorationConfig,
    seed: u64,
) -> Result<W1meRun, ExplorationError> {
    let config = ExplorationConfig { eta: 0.0, ..*config };
    w1me_loop(env, agent, None, &config, seed)
}
