//! Seeded, configuration-driven experiment drivers and the CSV/JSON
//! artifacts they write.

mod artifacts;
mod climber;
mod config;
mod maze;
mod pool;
mod toy;

pub use artifacts::{write_csv, write_manifest, LossRecord, Manifest};
pub use climber::{
    climber_env, climber_summary, explore_once, run_climber_explore, run_climber_seed, ClimberArtifacts, ClimberRun, EtaSummary,
    ReturnRecord, VisitRecord,
};
pub use config::{Experiment, ExperimentConfig, FULL_CLIMBER_SEEDS, FULL_MAZE_EPISODES};
pub use maze::{run_maze_eval, MazeArtifacts, ZSampleRecord};
pub use pool::run_parallel;
pub use toy::{run_random_mdp, run_self_loop, run_toy_fixedpoint, ToyArtifacts, ToyReport};

use thiserror::Error;

use crate::bellman_gan::VdalError;
use crate::dqn::DqnError;
use crate::environments::EnvError;
use crate::exploration::ExplorationError;
use crate::metrics::MetricsError;
use crate::neural::NeuralError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("config serialisation error: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Vdal(#[from] VdalError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::AdamConfig;
use crate::bellman_gan::{VdalConfig, VdalTrainer};
use crate::dqn::DqnConfig;
use crate::environments::Discount;
use crate::neural::{CriticNet, CriticSpec, GeneratorNet, GeneratorSpec, OneHotEncoder};

/// A generator/critic pair and trainer shaped by `cfg`, seeded so that
/// each network and the trainer draw from unrelated streams.
fn build_trainer(
    cfg: &ExperimentConfig,
    encoder: OneHotEncoder,
    output_dim: usize,
    discount: Discount,
    seed: u64,
) -> Result<VdalTrainer, ExperimentError> {
    let generator = GeneratorNet::new(
        GeneratorSpec {
            cond_dim: encoder.width(),
            embed_widths: cfg.generator_embed.clone(),
            trunk_widths: cfg.generator_trunk.clone(),
            noise_dim: cfg.noise_dim,
            output_dim,
        },
        derive_seed(seed, 101),
    )?;
    let critic = CriticNet::new(
        CriticSpec {
            cond_dim: encoder.width(),
            embed_widths: cfg.critic_embed.clone(),
            trunk_widths: cfg.critic_trunk.clone(),
            sample_dim: output_dim,
        },
        derive_seed(seed, 102),
    )?;
    let vdal = VdalConfig {
        discount,
        penalty: cfg.penalty,
        n_critic: cfg.n_critic,
        batch_size: cfg.batch_size,
        adam: AdamConfig::with_learning_rate(cfg.learning_rate),
        target_sync: (cfg.frozen_generator_sync > 0).then_some(cfg.frozen_generator_sync),
    };
    Ok(VdalTrainer::new(vdal, encoder, generator, critic, derive_seed(seed, 103))?)
}

fn dqn_config(cfg: &ExperimentConfig) -> DqnConfig {
    DqnConfig {
        discount: cfg.discount,
        epsilon: cfg.epsilon,
        adam: AdamConfig::with_learning_rate(cfg.dqn_learning_rate),
        batch_size: cfg.batch_size,
        target_sync: cfg.dqn_target_sync,
        huber_delta: cfg.huber_delta,
    }
}

/// A child seed for component `tag` of a run seeded with `seed`.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
