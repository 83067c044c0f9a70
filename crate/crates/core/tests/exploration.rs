mod common;

use vdal::experiment::{explore_once, run_climber_seed, ExperimentConfig};
use vdal::neural::Module;

fn short_climber(episodes: usize) -> ExperimentConfig {
    ExperimentConfig {
        episodes,
        ..ExperimentConfig::paper_climber()
    }
}

/// With `eta = 0` the intrinsic reward is multiplied away and the
/// generator draws from its own stream, so the agent cannot see it. The
/// intrinsic reward is still logged, so only the extrinsic side of the
/// episode logs is compared.
#[test]
fn zero_eta_reproduces_the_plain_dqn_trajectory_bitwise() {
    let cfg = short_climber(25);
    for seed in [0, 1] {
        let with_gan = explore_once(&cfg, 0.0, seed, true).unwrap();
        let plain = explore_once(&cfg, 0.0, seed, false).unwrap();
        assert!(with_gan.trainer.as_ref().is_some_and(|t| t.iteration() > 0));
        assert_eq!(with_gan.trajectory, plain.trajectory);
        let extrinsic = |run: &vdal::exploration::W1meRun| -> Vec<(usize, u64, usize)> {
            run.episodes.iter().map(|e| (e.episode, e.extrinsic_return.to_bits(), e.steps)).collect()
        };
        assert_eq!(extrinsic(&with_gan), extrinsic(&plain));
        assert_eq!(with_gan.visits, plain.visits);
        let bits = |run: &vdal::exploration::W1meRun| -> Vec<u64> {
            run.agent.online().parameters().iter().flat_map(|p| p.data().iter().map(|v| v.to_bits())).collect()
        };
        assert_eq!(bits(&with_gan), bits(&plain));
    }
}

#[test]
fn visit_counts_sum_to_steps_taken() {
    let cfg = short_climber(10);
    for eta in [0.0, 0.1] {
        let run = run_climber_seed(&cfg, eta, 3).unwrap();
        let steps: usize = run.episodes.iter().map(|e| e.steps).sum();
        assert_eq!(run.visits.iter().sum::<u64>(), steps as u64);
        assert_eq!(run.episodes.len(), 10);
        assert!(run.episodes.iter().all(|e| e.mean_intrinsic >= 0.0));
        if eta == 0.0 {
            assert!(run.episodes.iter().all(|e| e.mean_intrinsic == 0.0));
        }
    }
}
