use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::artifacts::{write_csv, write_manifest, LossRecord, Manifest};
use super::{build_trainer, dqn_config, stream, ExperimentConfig, ExperimentError};
use crate::autodiff::Tensor;
use crate::bellman_gan::{Baseline, ReplayPool, VdalError, StoredNextAction, Stopwatch, Transition, VdalTrainer};
use crate::dqn::{DqnAgent, QBaseline, QNetwork, QTransition, TargetRule};
use crate::environments::{Discount, Environment, Maze, Policy, UniformPolicy};
use crate::exploration::{encode_states, StateEncoding};
use crate::neural::OneHotEncoder;

/// One row of `zsamples.csv`: an 8-component return sample at a probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZSampleRecord {
    /// 0, 1, 2 for the centre and the two room probes.
    pub state_id: usize,
    pub sample_idx: usize,
    pub z0: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub z5: f64,
    pub z6: f64,
    pub z7: f64,
}

impl ZSampleRecord {
    fn new(state_id: usize, sample_idx: usize, z: &[f64]) -> Self {
        ZSampleRecord {
            state_id,
            sample_idx,
            z0: z[0],
            z1: z[1],
            z2: z[2],
            z3: z[3],
            z4: z[4],
            z5: z[5],
            z6: z[6],
            z7: z[7],
        }
    }

    pub fn values(&self) -> [f64; 8] {
        [self.z0, self.z1, self.z2, self.z3, self.z4, self.z5, self.z6, self.z7]
    }
}

#[derive(Clone, Debug)]
pub struct MazeArtifacts {
    pub zsamples: Vec<ZSampleRecord>,
    pub losses: Vec<LossRecord>,
    pub trainer: VdalTrainer,
    pub q_network: QNetwork,
}

impl MazeArtifacts {
    /// Samples at probe `state_id`, one row each.
    pub fn probe_samples(&self, state_id: usize) -> Vec<[f64; 8]> {
        self.zsamples
            .iter()
            .filter(|r| r.state_id == state_id)
            .map(ZSampleRecord::values)
            .collect()
    }
}

/// Offsets of `inner` expressed in units of `unit`.
struct Rescaled<'b> {
    inner: &'b dyn Baseline,
    unit: f64,
}

impl Baseline for Rescaled<'_> {
    fn offsets(&self, pairs: &[(usize, usize)]) -> Result<Tensor, VdalError> {
        Ok(self.inner.offsets(pairs)?.map(|v| v / self.unit))
    }
}

/// The Q-network learns in reward units, so stored rewards are restored.
fn q_batch(items: &[&Transition], encoding: &[Vec<f64>], unit: f64) -> Vec<QTransition> {
    items
        .iter()
        .map(|t| QTransition {
            state: encoding[t.state].clone(),
            action: t.action,
            reward: t.reward.iter().map(|r| r * unit).collect(),
            next_state: encoding[t.next_state].clone(),
            next_action: t.next_action,
            terminal: t.terminal,
        })
        .collect()
}

/// Evaluates the uniform-random policy on the four-room maze: a vector
/// Q-network learns the mean return by TD and the generator learns the
/// spread around it. Artifacts go to `out` when given.
pub fn run_maze_eval(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<MazeArtifacts, ExperimentError> {
    cfg.validate()?;
    let clock = Instant::now();
    let seed = cfg.seed;
    let env = Maze::four_rooms(cfg.discount)?;
    let m = env.reward_dim();
    let n_actions = env.n_actions();
    let encoder = OneHotEncoder::new(env.n_states(), n_actions);
    let encoding = encode_states(&env, StateEncoding::OneHot);
    let unit = if cfg.return_unit > 0.0 { cfg.return_unit } else { env.reward_scale() };
    let mut trainer = build_trainer(cfg, encoder, m, Discount::Scalar(cfg.discount), seed)?;
    let q = QNetwork::new(encoding[0].len(), n_actions, &cfg.dqn_hidden, m, super::derive_seed(seed, 104))?
        .with_value_scale(cfg.q_value_scale);
    let mut q_agent = DqnAgent::new(dqn_config(cfg), q)?;

    let policy = UniformPolicy { n_actions };
    let mut env_rng = stream(seed, 1);
    let mut policy_rng = stream(seed, 2);
    let mut replay_rng = stream(seed, 3);
    let watch = Stopwatch::new(cfg.record_wall_ms);

    let mut pool = ReplayPool::new(cfg.replay_capacity);
    let mut losses = Vec::new();
    let mut total = 0usize;
    for _ in 0..cfg.episodes {
        let mut state = env.reset();
        let mut action = policy.sample(env.state_index(&state), &mut policy_rng);
        for _ in 0..cfg.steps_per_episode {
            let outcome = env.step(&state, action, &mut env_rng)?;
            let s_next = env.state_index(&outcome.next_state);
            let next_action = policy.sample(s_next, &mut policy_rng);
            pool.push(Transition {
                state: env.state_index(&state),
                action,
                reward: outcome.reward.iter().map(|r| r / unit).collect(),
                next_state: s_next,
                next_action,
                terminal: outcome.terminal,
            });
            total += 1;

            if total.is_multiple_of(cfg.q_update_every) && pool.len() >= cfg.warmup {
                let batch = q_batch(&pool.sample(cfg.batch_size, &mut replay_rng), &encoding, unit);
                q_agent.update(&batch.iter().collect::<Vec<_>>(), TargetRule::Evaluation)?;
            }
            if total.is_multiple_of(cfg.vdal_every) && pool.len() >= cfg.warmup {
                let baseline = QBaseline {
                    net: q_agent.online(),
                    encoding: &encoding,
                };
                let scaled = Rescaled { inner: &baseline, unit };
                let stats = trainer.train_iteration(&pool, &StoredNextAction, Some(&scaled))?;
                losses.push(LossRecord {
                    iteration: stats.iteration,
                    critic_loss: stats.critic_loss,
                    generator_loss: stats.generator_loss,
                    penalty_mean: stats.penalty_mean,
                    bellman_residual: None,
                    wall_ms: watch.elapsed_ms(),
                });
            }
            state = outcome.next_state;
            action = next_action;
        }
    }

    // One uniformly random action per sample.
    let mut sample_rng = stream(seed, 5);
    let probes = env.layout().probes().all();
    let mut zsamples = Vec::with_capacity(probes.len() * cfg.samples_per_probe);
    let baseline = QBaseline {
        net: q_agent.online(),
        encoding: &encoding,
    };
    for (id, cell) in probes.iter().enumerate() {
        let s = env.state_index(cell);
        let pairs: Vec<(usize, usize)> = (0..cfg.samples_per_probe)
            .map(|_| (s, policy.sample(s, &mut sample_rng)))
            .collect();
        let z = trainer
            .sample(&pairs, 1, Some(&Rescaled { inner: &baseline, unit }))?
            .map(|v| v * unit);
        for i in 0..pairs.len() {
            zsamples.push(ZSampleRecord::new(id, i, z.row_slice(i)));
        }
    }

    let artifacts = MazeArtifacts {
        zsamples,
        losses,
        q_network: q_agent.online().clone(),
        trainer,
    };
    if let Some(dir) = out {
        write_csv(&dir.join("zsamples.csv"), &artifacts.zsamples)?;
        write_csv(&dir.join("losses.csv"), &artifacts.losses)?;
        write_manifest(
            dir,
            &Manifest {
                experiment: "maze-eval",
                crate_version: env!("CARGO_PKG_VERSION"),
                seeds: vec![seed],
                config: cfg,
                artifacts: vec!["zsamples.csv".into(), "losses.csv".into()],
                wall_seconds: clock.elapsed().as_secs_f64(),
            },
        )?;
    }
    Ok(artifacts)
}
