use std::fs;
use std::path::Path;

use vdal::experiment::{
    run_climber_explore, run_maze_eval, run_toy_fixedpoint, Experiment, ExperimentConfig, ExperimentError,
};

fn tiny_maze() -> ExperimentConfig {
    ExperimentConfig {
        episodes: 1,
        steps_per_episode: 120,
        samples_per_probe: 7,
        ..ExperimentConfig::paper_maze()
    }
}

fn tiny_climber() -> ExperimentConfig {
    ExperimentConfig {
        seeds: 2,
        episodes: 3,
        max_episode_steps: 40,
        final_window: 2,
        eta: vec![0.1],
        ..ExperimentConfig::paper_climber()
    }
}

fn tiny_toy() -> ExperimentConfig {
    ExperimentConfig {
        toy_iterations: 60,
        residual_every: 20,
        residual_atoms: 32,
        oracle_rollouts: 200,
        ..ExperimentConfig::toy()
    }
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn maze_artifacts_have_one_row_per_probe_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_maze();
    let art = run_maze_eval(&cfg, Some(dir.path())).unwrap();
    let (header, rows) = csv_rows(&dir.path().join("zsamples.csv"));
    let expected: Vec<String> = ["state_id", "sample_idx", "z0", "z1", "z2", "z3", "z4", "z5", "z6", "z7"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(header, expected);
    let probes = rows.iter().map(|r| r[0].clone()).collect::<std::collections::BTreeSet<_>>().len();
    assert_eq!(rows.len(), probes * cfg.samples_per_probe);
    assert_eq!(art.zsamples.len(), rows.len());
    assert!(dir.path().join("losses.csv").exists());
    let manifest: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["experiment"], "maze-eval");
}

#[test]
fn maze_reruns_write_identical_csvs() {
    let (first, second) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = tiny_maze();
    run_maze_eval(&cfg, Some(first.path())).unwrap();
    run_maze_eval(&cfg, Some(second.path())).unwrap();
    for name in ["zsamples.csv", "losses.csv"] {
        assert_eq!(read(&first.path().join(name)), read(&second.path().join(name)), "{name}");
    }
}

#[test]
fn climber_grid_gains_a_baseline_and_covers_every_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_climber();
    let art = run_climber_explore(&cfg, Some(dir.path())).unwrap();
    assert!(art.summary.iter().any(|s| s.eta == 0.0));
    assert_eq!(art.runs.len(), 2 * cfg.seeds);

    let (header, returns) = csv_rows(&dir.path().join("returns.csv"));
    assert_eq!(header, ["eta", "seed", "episode", "return", "mean_ri"]);
    assert_eq!(returns.len(), 2 * cfg.seeds * cfg.episodes);

    let (header, visits) = csv_rows(&dir.path().join("visits.csv"));
    assert_eq!(header, ["eta", "seed", "face", "state", "count"]);
    let states = art.runs[0].visits.len();
    assert_eq!(visits.len(), 2 * cfg.seeds * states);
    assert!(visits.iter().all(|r| r[4].parse::<u64>().is_ok()));
    let faces: std::collections::BTreeSet<&str> = visits.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(faces.into_iter().collect::<Vec<_>>(), ["camp", "north", "south"]);
    assert!(dir.path().join("runs").join("returns_eta0.1_seed1.csv").exists());
}

#[test]
fn climber_reruns_write_identical_csvs() {
    let (first, second) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = ExperimentConfig {
        jobs: 2,
        ..tiny_climber()
    };
    run_climber_explore(&cfg, Some(first.path())).unwrap();
    run_climber_explore(&ExperimentConfig { jobs: 1, ..cfg }, Some(second.path())).unwrap();
    for name in ["returns.csv", "visits.csv", "summary.csv"] {
        assert_eq!(read(&first.path().join(name)), read(&second.path().join(name)), "{name}");
    }
}

#[test]
fn toy_fixedpoint_reports_both_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let art = run_toy_fixedpoint(&tiny_toy(), Some(dir.path())).unwrap();
    for report in art.reports() {
        assert!(report.initial_residual.is_finite() && report.final_residual.is_finite());
        assert!(report.oracle_w1 >= 0.0);
    }
    let (_, summary) = csv_rows(&dir.path().join("summary.csv"));
    assert_eq!(summary.len(), 2);
    let (header, losses) = csv_rows(&dir.path().join("self_loop").join("losses.csv"));
    assert!(header.iter().any(|h| h == "bellman_residual"));
    assert_eq!(losses.len(), 60);
    assert!(dir.path().join("random_mdp").join("losses.csv").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let base = ExperimentConfig::paper_climber();
    let merged = base.merge_toml("seeds = 3\neta = [0.0, 0.5]").unwrap();
    assert_eq!(merged.seeds, 3);
    assert_eq!(merged.eta, [0.0, 0.5]);
    assert!(matches!(base.merge_toml("sedes = 3"), Err(ExperimentError::Config(_))));
}

#[test]
fn validation_rejects_negative_eta() {
    let cfg = ExperimentConfig {
        eta: vec![0.0, -0.1],
        ..ExperimentConfig::paper_climber()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn full_scale_restores_original_budgets() {
    let maze = ExperimentConfig::paper_maze().full_scale(Experiment::MazeEval);
    assert_eq!(maze.episodes, vdal::experiment::FULL_MAZE_EPISODES);
    let climber = ExperimentConfig::paper_climber().full_scale(Experiment::ClimberExplore);
    assert_eq!(climber.seeds, vdal::experiment::FULL_CLIMBER_SEEDS);
    assert_eq!(ExperimentConfig::named("toy").unwrap(), ExperimentConfig::toy());
    assert!(ExperimentConfig::named("nope").is_err());
}
