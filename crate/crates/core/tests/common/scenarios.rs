//! Seeded training scenarios whose outcomes several suites assert on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vdal::autodiff::{AdamConfig, Graph, Tensor};
use vdal::bellman_gan::{
    critic_loss, generated_pair, generator_loss, Batch, ReplayPool, ResampledNextAction, StoredNextAction,
    Transition, VdalConfig, VdalTrainer,
};
use vdal::environments::{Discount, Environment, FiniteMdp, UniformPolicy};
use vdal::exploration::AugmentedRewardSpec;
use vdal::metrics::{w1_exact_1d, w1_sliced, EmpiricalDistribution};
use vdal::neural::{CriticNet, CriticSpec, GeneratorNet, GeneratorSpec, Module, OneHotEncoder};

use super::{rel_err, FD_STEP};

pub fn generator(cond_dim: usize, embed: &[usize], trunk: &[usize], output_dim: usize, seed: u64) -> GeneratorNet {
    let spec = GeneratorSpec {
        cond_dim,
        embed_widths: embed.to_vec(),
        trunk_widths: trunk.to_vec(),
        noise_dim: 2,
        output_dim,
    };
    GeneratorNet::new(spec, seed).unwrap()
}

pub fn critic(cond_dim: usize, embed: &[usize], trunk: &[usize], sample_dim: usize, seed: u64) -> CriticNet {
    let spec = CriticSpec {
        cond_dim,
        embed_widths: embed.to_vec(),
        trunk_widths: trunk.to_vec(),
        sample_dim,
    };
    CriticNet::new(spec, seed).unwrap()
}

/// A scalar-return trainer over `n_states` single-action states with
/// `[8] -> [32]` networks.
pub fn small_trainer(discount: f64, n_states: usize, lr: f64, penalty: f64, seed: u64) -> VdalTrainer {
    let enc = OneHotEncoder::new(n_states, 1);
    let mut cfg = VdalConfig::new(Discount::Scalar(discount));
    cfg.adam = AdamConfig::with_learning_rate(lr);
    cfg.penalty = penalty;
    let gen = generator(enc.width(), &[8], &[32], 1, seed + 1);
    let crit = critic(enc.width(), &[8], &[32], 1, seed + 2);
    VdalTrainer::new(cfg, enc, gen, crit, seed + 3).unwrap()
}

/// Bimodal rewards on one state with no discount, where the backup target
/// is the data itself. Returns `(W1(generated, data), data range)`.
pub fn bimodal_fit(iterations: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rewards: Vec<f64> = (0..512)
        .map(|i| {
            let centre = if i % 2 == 0 { -1.0 } else { 2.0 };
            centre + 0.1 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let mut pool = ReplayPool::new(rewards.len());
    for &r in &rewards {
        pool.push(Transition {
            state: 0,
            action: 0,
            reward: vec![r],
            next_state: 0,
            next_action: 0,
            terminal: false,
        });
    }
    let mut t = small_trainer(0.0, 1, 1e-3, 0.1, 20);
    for _ in 0..iterations {
        t.train_iteration(&pool, &StoredNextAction, None).unwrap();
    }
    let generated = t.sample(&[(0, 0)], 2000, None).unwrap().into_data();
    let hi = rewards.iter().cloned().fold(f64::MIN, f64::max);
    let lo = rewards.iter().cloned().fold(f64::MAX, f64::min);
    let dist = w1_exact_1d(
        &EmpiricalDistribution::from_scalars(&generated).unwrap(),
        &EmpiricalDistribution::from_scalars(&rewards).unwrap(),
    )
    .unwrap();
    (dist, hi - lo)
}

/// Trains the joint generator over `(reward, next-state features)` on a
/// 5-state stochastic MDP, with the state block undiscounted. Returns the
/// worst per-pair sliced W1 between the generated state slice and 10^4
/// kernel draws, and the diameter of the state features.
pub fn state_slice_fit(iterations: usize) -> (f64, f64) {
    let mdp = FiniteMdp::random(5, 2, 3, 1, 17);
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let spec = AugmentedRewardSpec {
        reward_dim: 1,
        state_dim: mdp.feature_dim(),
        discount: 0.9,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pool = ReplayPool::new(4000);
    for _ in 0..400 {
        for s in 0..ns {
            for a in 0..na {
                let out = mdp.step(&s, a, &mut rng).unwrap();
                pool.push(Transition {
                    state: s,
                    action: a,
                    reward: spec.augment(&out.reward, &mdp.state_features(&out.next_state)).unwrap(),
                    next_state: out.next_state,
                    next_action: 0,
                    terminal: out.terminal,
                });
            }
        }
    }
    let enc = OneHotEncoder::new(ns, na);
    let dim = spec.total_dim();
    let gen = generator(enc.width(), &[32], &[64, 64], dim, 1);
    let crit = critic(enc.width(), &[32], &[64, 64], dim, 2);
    let mut cfg = VdalConfig::new(spec.discount_block());
    cfg.adam = AdamConfig {
        beta1: 0.5,
        beta2: 0.9,
        ..AdamConfig::with_learning_rate(1e-3)
    };
    cfg.batch_size = 256;
    let mut trainer = VdalTrainer::new(cfg, enc, gen, crit, 3).unwrap();
    let policy = UniformPolicy { n_actions: na };
    for i in 0..iterations {
        // Step decay so that the last snapshot is not dominated by
        // minibatch noise.
        if i == iterations / 2 {
            trainer.set_learning_rate(1e-4);
        } else if i == 3 * iterations / 4 {
            trainer.set_learning_rate(1e-5);
        }
        trainer.train_iteration(&pool, &ResampledNextAction(&policy), None).unwrap();
    }

    let features: Vec<f64> = (0..ns).map(|s| mdp.state_features(&s)[0]).collect();
    let diameter = features.iter().cloned().fold(f64::MIN, f64::max) - features.iter().cloned().fold(f64::MAX, f64::min);
    let z = trainer.tabular_z(ns, na, 2000, None).unwrap();
    let mut worst: f64 = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let slice = z.get(s, a).unwrap().marginal(1, dim);
            let outcomes = mdp.outcomes(s, a);
            let draws: Vec<Vec<f64>> = (0..10_000)
                .map(|_| {
                    let mut u: f64 = rng.random();
                    let hit = outcomes.iter().find(|o| {
                        u -= o.prob;
                        u < 0.0
                    });
                    mdp.state_features(&hit.unwrap_or(outcomes.last().unwrap()).next)
                })
                .collect();
            let oracle = EmpiricalDistribution::uniform(draws).unwrap();
            let w = w1_sliced(&slice, &oracle, 16, 0).unwrap();
            worst = worst.max(w);
        }
    }
    (worst, diameter)
}

/// A batch over three states and two actions with 2-D rewards and one
/// undiscounted entry.
pub fn fd_batch() -> Batch {
    let enc = OneHotEncoder::new(3, 2);
    let pairs = [(0, 1), (2, 0), (1, 1), (0, 0), (2, 1)];
    let next = [(1, 0), (0, 0), (2, 1), (1, 1), (0, 1)];
    let (b, m) = (pairs.len(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    Batch {
        cond: enc.encode(&pairs),
        next_cond: enc.encode(&next),
        reward: Tensor::new(b, m, (0..b * m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
        next_scale: Tensor::new(b, m, (0..b * m).map(|i| if i == 2 { 0.0 } else { 0.9 }).collect()).unwrap(),
        offset: Tensor::zeros(b, m),
        next_offset: Tensor::zeros(b, m),
    }
}

pub fn noise(rows: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(rows, 2, (0..rows * 2).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Worst relative error of `grads` against central differences of `loss`
/// over every parameter entry of `net`.
pub fn fd_error<M: Module + Clone>(net: &M, grads: &[Tensor], loss: impl Fn(&M) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (k, grad) in grads.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = net.parameters()[k].data()[j];
            probe.parameters_mut()[k].data_mut()[j] = orig + FD_STEP;
            let up = loss(&probe);
            probe.parameters_mut()[k].data_mut()[j] = orig - FD_STEP;
            let down = loss(&probe);
            probe.parameters_mut()[k].data_mut()[j] = orig;
            worst = worst.max(rel_err(grad.data()[j], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

const MIX: [f64; 5] = [0.1, 0.5, 0.9, 0.3, 0.7];

/// Gradient of the full penalised critic loss, which differentiates through
/// the input gradient, against finite differences.
pub fn critic_loss_fd_error(seed: u64) -> f64 {
    let batch = fd_batch();
    let gen = generator(5, &[8], &[32], 2, 7);
    let crit = critic(5, &[8], &[32], 2, 30 + seed);
    let loss_of = |c: &CriticNet| {
        let g = Graph::new();
        let bg = gen.bind(&g, false);
        let (x, xn) = generated_pair(&bg, &bg, &batch, g.constant(noise(5, 1)), g.constant(noise(5, 2))).unwrap();
        critic_loss(&c.bind(&g, false), &batch.cond, x, xn, &MIX, 0.1).unwrap().loss.item().unwrap()
    };
    let g = Graph::new();
    let bg = gen.bind(&g, false);
    let bc = crit.bind(&g, true);
    let (x, xn) = generated_pair(&bg, &bg, &batch, g.constant(noise(5, 1)), g.constant(noise(5, 2))).unwrap();
    let loss = critic_loss(&bc, &batch.cond, x, xn, &MIX, 0.1).unwrap().loss;
    let grads = g.backward(loss).unwrap().collect(&bc.params());
    fd_error(&crit, &grads, loss_of)
}

/// Generator-loss gradient, which flows through both generated branches.
pub fn generator_loss_fd_error(seed: u64) -> f64 {
    let batch = fd_batch();
    let crit = critic(5, &[8], &[32], 2, 40);
    let gen = generator(5, &[8], &[32], 2, 50 + seed);
    let loss_of = |gn: &GeneratorNet| {
        let g = Graph::new();
        let bg = gn.bind(&g, false);
        let (x, xn) = generated_pair(&bg, &bg, &batch, g.constant(noise(5, 1)), g.constant(noise(5, 2))).unwrap();
        generator_loss(&crit.bind(&g, false), &batch.cond, x, xn).unwrap().item().unwrap()
    };
    let g = Graph::new();
    let bg = gen.bind(&g, true);
    let (x, xn) = generated_pair(&bg, &bg, &batch, g.constant(noise(5, 1)), g.constant(noise(5, 2))).unwrap();
    let loss = generator_loss(&crit.bind(&g, false), &batch.cond, x, xn).unwrap();
    let grads = g.backward(loss).unwrap().collect(&bg.params());
    fd_error(&gen, &grads, loss_of)
}
