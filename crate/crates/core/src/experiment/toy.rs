use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::artifacts::{write_csv, write_manifest, LossRecord, Manifest};
use super::{build_trainer, derive_seed, stream, ExperimentConfig, ExperimentError};
use crate::bellman_gan::{NextAction, ReplayPool, ResampledNextAction, Stopwatch, Transition, VdalTrainer};
use crate::environments::{monte_carlo_returns, Discount, Environment, FiniteMdp, Policy, Rollouts, UniformPolicy};
use crate::metrics::{bellman_residual, w1, BackupConfig};
use crate::neural::OneHotEncoder;

/// Outcome of one toy task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToyReport {
    pub task: &'static str,
    pub iterations: usize,
    /// Residual of the untrained generator.
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Mean of the generated samples, averaged over all pairs.
    pub final_mean: f64,
    /// Largest per-pair W1 between generated samples and Monte-Carlo
    /// returns.
    pub oracle_w1: f64,
}

#[derive(Clone, Debug)]
pub struct ToyArtifacts {
    pub self_loop: ToyReport,
    pub random_mdp: ToyReport,
    pub self_loop_losses: Vec<LossRecord>,
    pub random_mdp_losses: Vec<LossRecord>,
}

impl ToyArtifacts {
    pub fn reports(&self) -> [&ToyReport; 2] {
        [&self.self_loop, &self.random_mdp]
    }
}

/// Every `(s, a)` visited equally often, successors drawn from the kernel.
fn tabular_pool(mdp: &FiniteMdp, per_pair: usize, seed: u64) -> Result<ReplayPool, ExperimentError> {
    let mut rng = stream(seed, 6);
    let mut pool = ReplayPool::new(per_pair * mdp.n_states() * mdp.n_actions());
    for _ in 0..per_pair {
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let out = mdp.step(&s, a, &mut rng)?;
                pool.push(Transition {
                    state: s,
                    action: a,
                    reward: out.reward,
                    next_state: out.next_state,
                    next_action: 0,
                    terminal: out.terminal,
                });
            }
        }
    }
    Ok(pool)
}

/// Trains `trainer` on `pool`, logging the residual of `mdp` under
/// `policy` every `cfg.residual_every` iterations.
fn fit<P: Policy>(
    cfg: &ExperimentConfig,
    task: &'static str,
    trainer: &mut VdalTrainer,
    pool: &ReplayPool,
    mdp: &FiniteMdp,
    policy: &P,
    seed: u64,
) -> Result<(ToyReport, Vec<LossRecord>), ExperimentError> {
    let discount = Discount::Scalar(cfg.discount);
    let mut backup = BackupConfig::new(discount.clone());
    backup.seed = derive_seed(seed, 7);
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let atoms = cfg.residual_atoms;
    let next = ResampledNextAction(policy);
    let watch = Stopwatch::new(cfg.record_wall_ms);

    let initial_residual = bellman_residual(&trainer.tabular_z(ns, na, atoms, None)?, mdp, policy, &backup)?;
    let mut final_residual = initial_residual;
    let mut losses = Vec::with_capacity(cfg.toy_iterations);
    for i in 1..=cfg.toy_iterations {
        let stats = trainer.train_iteration(pool, &next as &dyn NextAction, None)?;
        let residual = if i % cfg.residual_every == 0 || i == cfg.toy_iterations {
            let r = bellman_residual(&trainer.tabular_z(ns, na, atoms, None)?, mdp, policy, &backup)?;
            final_residual = r;
            Some(r)
        } else {
            None
        };
        losses.push(LossRecord {
            iteration: stats.iteration,
            critic_loss: stats.critic_loss,
            generator_loss: stats.generator_loss,
            penalty_mean: stats.penalty_mean,
            bellman_residual: residual,
            wall_ms: watch.elapsed_ms(),
        });
    }

    let z = trainer.tabular_z(ns, na, cfg.residual_atoms, None)?;
    let rollouts = Rollouts {
        discount,
        // Discounted tail below 1e-9 of the reward scale.
        horizon: ((1e-9f64).ln() / cfg.discount.ln()).ceil().max(1.0) as usize,
        count: cfg.oracle_rollouts,
        seed: derive_seed(seed, 8),
    };
    let mut oracle_w1: f64 = 0.0;
    let mut mean_total = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let generated = z.get(s, a)?;
            let oracle = monte_carlo_returns(mdp, policy, &s, a, &rollouts)?;
            oracle_w1 = oracle_w1.max(w1(generated, &oracle, backup.seed)?);
            mean_total += generated.mean()[0];
        }
    }
    let report = ToyReport {
        task,
        iterations: cfg.toy_iterations,
        initial_residual,
        final_residual,
        final_mean: mean_total / (ns * na) as f64,
        oracle_w1,
    };
    Ok((report, losses))
}

/// The self-loop with reward 1 from a single stored transition.
pub fn run_self_loop(cfg: &ExperimentConfig, seed: u64) -> Result<(ToyReport, Vec<LossRecord>), ExperimentError> {
    let mdp = FiniteMdp::self_loop(1.0);
    let pool = tabular_pool(&mdp, 1, seed)?;
    let mut trainer = build_trainer(cfg, OneHotEncoder::new(1, 1), 1, Discount::Scalar(cfg.discount), seed)?;
    fit(cfg, "self_loop", &mut trainer, &pool, &mdp, &UniformPolicy { n_actions: 1 }, seed)
}

/// A random dense MDP with two actions under the uniform policy.
pub fn run_random_mdp(cfg: &ExperimentConfig, seed: u64) -> Result<(ToyReport, Vec<LossRecord>), ExperimentError> {
    let ns = cfg.random_mdp_states;
    let mdp = FiniteMdp::random(ns, 2, 3, 1, derive_seed(seed, 9));
    let pool = tabular_pool(&mdp, 200, seed)?;
    let na = mdp.n_actions();
    let wide = ExperimentConfig {
        generator_embed: cfg.random_mdp_embed.clone(),
        generator_trunk: cfg.random_mdp_trunk.clone(),
        critic_embed: cfg.random_mdp_embed.clone(),
        critic_trunk: cfg.random_mdp_trunk.clone(),
        learning_rate: cfg.random_mdp_learning_rate,
        ..cfg.clone()
    };
    let mut trainer = build_trainer(&wide, OneHotEncoder::new(ns, na), 1, Discount::Scalar(cfg.discount), seed)?;
    fit(cfg, "random_mdp", &mut trainer, &pool, &mdp, &UniformPolicy { n_actions: na }, seed)
}

/// Both toy tasks; with `out`, each writes `losses.csv` into its own
/// subdirectory and `summary.csv` collects the reports.
pub fn run_toy_fixedpoint(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ToyArtifacts, ExperimentError> {
    cfg.validate()?;
    let clock = Instant::now();
    let (self_loop, self_loop_losses) = run_self_loop(cfg, cfg.seed)?;
    let (random_mdp, random_mdp_losses) = run_random_mdp(cfg, cfg.seed)?;
    let artifacts = ToyArtifacts {
        self_loop,
        random_mdp,
        self_loop_losses,
        random_mdp_losses,
    };
    if let Some(dir) = out {
        write_csv(&dir.join("self_loop").join("losses.csv"), &artifacts.self_loop_losses)?;
        write_csv(&dir.join("random_mdp").join("losses.csv"), &artifacts.random_mdp_losses)?;
        write_csv(&dir.join("summary.csv"), &artifacts.reports())?;
        write_manifest(
            dir,
            &Manifest {
                experiment: "toy-fixedpoint",
                crate_version: env!("CARGO_PKG_VERSION"),
                seeds: vec![cfg.seed],
                config: cfg,
                artifacts: vec![
                    "self_loop/losses.csv".into(),
                    "random_mdp/losses.csv".into(),
                    "summary.csv".into(),
                ],
                wall_seconds: clock.elapsed().as_secs_f64(),
            },
        )?;
    }
    Ok(artifacts)
}
