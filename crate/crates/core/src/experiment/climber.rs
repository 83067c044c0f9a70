use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::artifacts::{write_csv, write_manifest, Manifest};
use super::{build_trainer, derive_seed, dqn_config, run_parallel, ExperimentConfig, ExperimentError};
use crate::dqn::{DqnAgent, QNetwork};
use crate::environments::{Climber, ClimberParams, Environment, Face};
use crate::exploration::{
    dqn_baseline, encode_states, w1me_loop, AugmentedRewardSpec, EpisodeLog, ExplorationConfig, W1meRun,
};
use crate::neural::OneHotEncoder;

/// One row of `returns.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReturnRecord {
    pub eta: f64,
    pub seed: u64,
    pub episode: usize,
    #[serde(rename = "return")]
    pub extrinsic_return: f64,
    pub mean_ri: f64,
}

/// One row of `visits.csv`; the camp is reported as face `camp`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisitRecord {
    pub eta: f64,
    pub seed: u64,
    pub face: &'static str,
    pub state: usize,
    pub count: u64,
}

/// The outcome of one exploration run.
#[derive(Clone, Debug)]
pub struct ClimberRun {
    pub eta: f64,
    pub seed: u64,
    pub episodes: Vec<EpisodeLog>,
    /// Steps taken from each state index.
    pub visits: Vec<u64>,
    pub north_visits: u64,
    /// Mean extrinsic return over the last `final_window` episodes.
    pub final_return: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaSummary {
    pub eta: f64,
    pub mean_final_return: f64,
    pub median_final_return: f64,
    pub mean_north_visits: f64,
}

#[derive(Clone, Debug)]
pub struct ClimberArtifacts {
    pub runs: Vec<ClimberRun>,
    pub summary: Vec<EtaSummary>,
}

impl ClimberArtifacts {
    pub fn returns(&self) -> Vec<ReturnRecord> {
        self.runs.iter().flat_map(return_rows).collect()
    }

    pub fn visits(&self, env_for_seed: impl Fn(u64) -> Climber) -> Vec<VisitRecord> {
        self.runs.iter().flat_map(|r| visit_rows(r, &env_for_seed(r.seed))).collect()
    }

    /// Runs for `eta`, in seed order.
    pub fn runs_for(&self, eta: f64) -> Vec<&ClimberRun> {
        self.runs.iter().filter(|r| r.eta == eta).collect()
    }
}

fn return_rows(run: &ClimberRun) -> Vec<ReturnRecord> {
    run.episodes
        .iter()
        .map(|e| ReturnRecord {
            eta: run.eta,
            seed: run.seed,
            episode: e.episode,
            extrinsic_return: e.extrinsic_return,
            mean_ri: e.mean_intrinsic,
        })
        .collect()
}

fn visit_rows(run: &ClimberRun, env: &Climber) -> Vec<VisitRecord> {
    run.visits
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let s = env.state_from_index(i);
            VisitRecord {
                eta: run.eta,
                seed: run.seed,
                face: match s.face {
                    None => "camp",
                    Some(Face::North) => "north",
                    Some(Face::South) => "south",
                },
                state: s.progress,
                count,
            }
        })
        .collect()
}

fn exploration_config(cfg: &ExperimentConfig, env: &Climber, eta: f64) -> ExplorationConfig {
    ExplorationConfig {
        q_encoding: cfg.q_encoding,
        eta,
        n_explore: cfg.n_explore,
        steps_per_round: cfg.steps_per_round,
        intrinsic_cap: if cfg.intrinsic_cap > 0.0 {
            cfg.intrinsic_cap
        } else {
            10.0 * env.reward_scale()
        },
        episodes: cfg.episodes,
        max_episode_steps: cfg.max_episode_steps,
        dqn_updates_per_round: cfg.dqn_updates_per_round,
        vdal_iterations_per_round: cfg.vdal_iterations_per_round,
        warmup: cfg.warmup,
        replay_capacity: cfg.replay_capacity,
    }
}

pub fn climber_env(seed: u64) -> Result<Climber, ExperimentError> {
    Ok(Climber::new(ClimberParams::default(), seed)?)
}

/// Raw loop output for one `(eta, seed)`. With `eta = 0` and
/// `with_generator` unset this is plain epsilon-greedy DQN.
pub fn explore_once(
    cfg: &ExperimentConfig,
    eta: f64,
    seed: u64,
    with_generator: bool,
) -> Result<W1meRun, ExperimentError> {
    let env = climber_env(seed)?;
    let explore = exploration_config(cfg, &env, eta);
    let input = encode_states(&env, cfg.q_encoding)[0].len();
    let q = QNetwork::new(input, env.n_actions(), &cfg.dqn_hidden, 1, derive_seed(seed, 201))?;
    let agent = DqnAgent::new(dqn_config(cfg), q)?;
    if !with_generator {
        return Ok(dqn_baseline(&env, agent, &explore, seed)?);
    }
    let spec = AugmentedRewardSpec {
        reward_dim: 1,
        state_dim: env.feature_dim(),
        discount: cfg.discount,
    };
    let output = if cfg.generator_output > 0 {
        cfg.generator_output
    } else {
        spec.total_dim()
    };
    let encoder = OneHotEncoder::new(env.n_states(), env.n_actions());
    let trainer = build_trainer(cfg, encoder, output, spec.discount_block(), seed)?;
    Ok(w1me_loop(&env, agent, Some(trainer), &explore, seed)?)
}

/// One `(eta, seed)` run. The generator is skipped at `eta = 0`, where it
/// cannot influence the agent.
pub fn run_climber_seed(cfg: &ExperimentConfig, eta: f64, seed: u64) -> Result<ClimberRun, ExperimentError> {
    let run = explore_once(cfg, eta, seed, eta > 0.0)?;
    let env = climber_env(seed)?;
    let north_visits = (0..env.n_states())
        .filter(|&i| env.state_from_index(i).face == Some(Face::North))
        .map(|i| run.visits[i])
        .sum();
    let tail = &run.episodes[run.episodes.len().saturating_sub(cfg.final_window)..];
    let final_return = tail.iter().map(|e| e.extrinsic_return).sum::<f64>() / tail.len().max(1) as f64;
    Ok(ClimberRun {
        eta,
        seed,
        episodes: run.episodes,
        visits: run.visits,
        north_visits,
        final_return,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn climber_summary(runs: &[ClimberRun], etas: &[f64]) -> Vec<EtaSummary> {
    etas.iter()
        .map(|&eta| {
            let mine: Vec<&ClimberRun> = runs.iter().filter(|r| r.eta == eta).collect();
            let n = mine.len().max(1) as f64;
            let mut finals: Vec<f64> = mine.iter().map(|r| r.final_return).collect();
            EtaSummary {
                eta,
                mean_final_return: finals.iter().sum::<f64>() / n,
                median_final_return: median(&mut finals),
                mean_north_visits: mine.iter().map(|r| r.north_visits as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Every `(eta, seed)` of the grid on `cfg.jobs` workers. With `out`,
/// per-run CSVs go to `out/runs/` and merged `returns.csv`, `visits.csv`
/// and `summary.csv` to `out/`.
pub fn run_climber_explore(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ClimberArtifacts, ExperimentError> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut etas = cfg.eta.clone();
    if !etas.contains(&0.0) {
        etas.insert(0, 0.0);
    }
    let grid: Vec<(f64, u64)> = etas
        .iter()
        .flat_map(|&e| cfg.seed_list().into_iter().map(move |s| (e, s)))
        .collect();
    let results = run_parallel(&grid, cfg.jobs, |&(eta, seed)| {
        let run = run_climber_seed(cfg, eta, seed)?;
        if let Some(dir) = out {
            let stem = format!("eta{eta}_seed{seed}");
            let runs = dir.join("runs");
            write_csv(&runs.join(format!("returns_{stem}.csv")), &return_rows(&run))?;
            write_csv(&runs.join(format!("visits_{stem}.csv")), &visit_rows(&run, &climber_env(seed)?))?;
        }
        Ok::<_, ExperimentError>(run)
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let artifacts = ClimberArtifacts {
        summary: climber_summary(&runs, &etas),
        runs,
    };
    if let Some(dir) = out {
        write_csv(&dir.join("returns.csv"), &artifacts.returns())?;
        let visits: Vec<VisitRecord> = artifacts
            .runs
            .iter()
            .map(|r| Ok(visit_rows(r, &climber_env(r.seed)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?
            .concat();
        write_csv(&dir.join("visits.csv"), &visits)?;
        write_csv(&dir.join("summary.csv"), &artifacts.summary)?;
        write_manifest(
            dir,
            &Manifest {
                experiment: "climber-explore",
                crate_version: env!("CARGO_PKG_VERSION"),
                seeds: cfg.seed_list(),
                config: cfg,
                artifacts: vec!["returns.csv".into(), "visits.csv".into(), "summary.csv".into()],
                wall_seconds: clock.elapsed().as_secs_f64(),
            },
        )?;
    }
    Ok(artifacts)
}
