use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use vdal::experiment::{
    run_climber_explore, run_maze_eval, run_toy_fixedpoint, Experiment, ExperimentConfig, ExperimentError,
};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("preset '{preset}' does not fit {experiment}")]
    PresetMismatch { preset: String, experiment: Experiment },
}

#[derive(Parser, Debug)]
#[command(name = "vdal", version, about = "Bellman-GAN distributional RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn 8-component return distributions on the four-room maze.
    MazeEval(Common),
    /// Compare exploration bonuses on the two-face climber.
    ClimberExplore(Common),
    /// Fit the one-state self-loop and a small random MDP.
    ToyFixedpoint(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML file whose keys override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated exploration weights.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Directory for CSV and manifest output.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Original episode and seed budgets instead of desk scale.
    #[arg(long)]
    full: bool,
    /// `paper-maze`, `paper-climber` or `toy`.
    #[arg(long)]
    preset: Option<String>,
}

impl Common {
    fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.preset {
            Some(name) => {
                let expected = match experiment {
                    Experiment::MazeEval => "paper-maze",
                    Experiment::ClimberExplore => "paper-climber",
                    Experiment::ToyFixedpoint => "toy",
                };
                if name != expected {
                    return Err(CliError::PresetMismatch {
                        preset: name.clone(),
                        experiment,
                    });
                }
                ExperimentConfig::named(name)?
            }
            None => ExperimentConfig::preset_for(experiment),
        };
        if self.full {
            cfg = cfg.full_scale(experiment);
        }
        if let Some(path) = &self.config {
            cfg = cfg.merge_file(path)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(seeds) = self.seeds {
            cfg.seeds = seeds;
        }
        if let Some(eta) = &self.eta {
            cfg.eta = eta.clone();
        }
        if let Some(episodes) = self.episodes {
            cfg.episodes = episodes;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::MazeEval(args) => {
            let cfg = args.resolve(Experiment::MazeEval)?;
            let art = run_maze_eval(&cfg, Some(&args.out))?;
            println!("maze-eval: {} VDAL iterations, {} samples", art.losses.len(), art.zsamples.len());
            for id in 0..3 {
                let samples = art.probe_samples(id);
                let mut mean = [0.0; 8];
                for s in &samples {
                    for (m, v) in mean.iter_mut().zip(s) {
                        *m += v / samples.len() as f64;
                    }
                }
                let row: Vec<String> = mean.iter().map(|v| format!("{v:7.3}")).collect();
                println!("  probe {id} mean [{}]", row.join(" "));
            }
        }
        Command::ClimberExplore(args) => {
            let cfg = args.resolve(Experiment::ClimberExplore)?;
            let art = run_climber_explore(&cfg, Some(&args.out))?;
            println!("{:>8} {:>12} {:>12} {:>12}", "eta", "mean_return", "median", "north_visits");
            for s in &art.summary {
                println!(
                    "{:>8} {:>12.3} {:>12.3} {:>12.1}",
                    s.eta, s.mean_final_return, s.median_final_return, s.mean_north_visits
                );
            }
        }
        Command::ToyFixedpoint(args) => {
            let cfg = args.resolve(Experiment::ToyFixedpoint)?;
            let art = run_toy_fixedpoint(&cfg, Some(&args.out))?;
            for r in art.reports() {
                println!(
                    "{}: mean {:.4}, residual {:.4} -> {:.4}, W1 to Monte Carlo {:.4}",
                    r.task, r.final_mean, r.initial_residual, r.final_residual, r.oracle_w1
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
