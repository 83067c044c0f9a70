use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vdal::environments::{Climber, ClimberParams, ClimberState, Environment, Face, Maze, MazeLayout};

/// Upper 1% points of the chi-square distribution by degrees of freedom.
const CHI2_99: [f64; 5] = [0.0, 6.635, 9.210, 11.345, 13.277];

fn fall_histogram(face: Face, from: usize, draws: usize) -> Vec<usize> {
    let climber = Climber::new(ClimberParams::default(), 123).unwrap();
    let slope = climber.params().face(face).slope;
    let state = ClimberState {
        progress: from,
        face: Some(face),
    };
    let wrong = 1 - climber.correct_action(face, from) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut counts = vec![0; slope + 1];
    for _ in 0..draws {
        let next = climber.step(&state, wrong, &mut rng).unwrap().next_state;
        counts[from - next.progress] += 1;
    }
    counts
}

fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

#[test]
fn wrong_action_falls_are_uniform() {
    for (face, from) in [(Face::North, 7), (Face::South, 12)] {
        let counts = fall_histogram(face, from, 100_000);
        let stat = chi_square_uniform(&counts);
        assert!(stat < CHI2_99[counts.len() - 1], "{face:?}: chi2 {stat} for {counts:?}");
    }
}

#[test]
fn falls_clamp_at_camp() {
    let counts = fall_histogram(Face::North, 2, 10_000);
    // Falls of 2, 3 and 4 all land at camp; the histogram records the
    // clamped drop, so only drops 0..=2 occur.
    assert_eq!(counts[3] + counts[4], 0);
    assert!(counts[2] > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn climber_is_deterministic_and_in_bounds(env_seed in any::<u64>(), step_seed in any::<u64>(), actions in prop::collection::vec(0usize..2, 1..300)) {
        let run = || {
            let climber = Climber::new(ClimberParams::default(), env_seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(step_seed);
            let mut state = climber.reset();
            let mut trace = Vec::new();
            for &a in &actions {
                let out = climber.step(&state, a, &mut rng).unwrap();
                if let Some(f) = out.next_state.face {
                    assert!(out.next_state.progress <= climber.params().face(f).summit);
                    assert!(out.next_state.progress >= 1);
                }
                trace.push((out.next_state, out.reward[0]));
                if out.terminal {
                    break;
                }
                state = out.next_state;
            }
            trace
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn maze_rewards_have_one_nonzero_component(gamma in 0.0f64..0.99, walk in prop::collection::vec(0usize..4, 1..400)) {
        let maze = Maze::new(MazeLayout::four_rooms(), gamma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = maze.reset();
        for a in walk {
            let out = maze.step(&s, a, &mut rng).unwrap();
            let nonzero: Vec<f64> = out.reward.iter().copied().filter(|r| *r != 0.0).collect();
            prop_assert!(nonzero.len() <= 1);
            if let Some(v) = nonzero.first() {
                prop_assert!((v - 1.0 / (1.0 - gamma)).abs() < 1e-12);
            }
            s = out.next_state;
        }
    }
}
