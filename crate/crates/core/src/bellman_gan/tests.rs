use super::*;
use crate::autodiff::{Graph, Tensor};
use crate::environments::Discount;
use crate::neural::{CriticNet, CriticSpec, GeneratorNet, GeneratorSpec, Module, OneHotEncoder};

fn small_generator(cond_dim: usize, output_dim: usize, seed: u64) -> GeneratorNet {
    GeneratorNet::new(
        GeneratorSpec {
            cond_dim,
            embed_widths: vec![4],
            trunk_widths: vec![6],
            noise_dim: 2,
            output_dim,
        },
        seed,
    )
    .unwrap()
}

fn small_critic(cond_dim: usize, sample_dim: usize, seed: u64) -> CriticNet {
    CriticNet::new(
        CriticSpec {
            cond_dim,
            embed_widths: vec![4],
            trunk_widths: vec![6],
            sample_dim,
        },
        seed,
    )
    .unwrap()
}

fn zeroed<M: Module>(mut m: M) -> M {
    for p in m.parameters_mut() {
        p.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    m
}

/// `f(x | s, a) = x` for scalar samples.
fn identity_critic(cond_dim: usize) -> CriticNet {
    let spec = CriticSpec {
        cond_dim,
        embed_widths: vec![2],
        trunk_widths: vec![],
        sample_dim: 1,
    };
    let mut c = zeroed(CriticNet::new(spec, 0).unwrap());
    let trunk_weight = c.parameters_mut().into_iter().nth(2).unwrap();
    trunk_weight.set(2, 0, 1.0);
    c
}

fn batch(b: usize, gamma: f64, terminal: bool) -> Batch {
    let enc = OneHotEncoder::new(2, 2);
    let pairs: Vec<(usize, usize)> = (0..b).map(|i| (i % 2, (i / 2) % 2)).collect();
    Batch {
        cond: enc.encode(&pairs),
        next_cond: enc.encode(&pairs.iter().map(|&(s, a)| (1 - s, a)).collect::<Vec<_>>()),
        reward: Tensor::column(&(0..b).map(|i| i as f64 * 0.5 - 1.0).collect::<Vec<_>>()),
        next_scale: Tensor::filled(b, 1, if terminal { 0.0 } else { gamma }),
        offset: Tensor::zeros(b, 1),
        next_offset: Tensor::zeros(b, 1),
    }
}

fn noise(b: usize, shift: f64) -> Tensor {
    Tensor::new(b, 2, (0..2 * b).map(|i| (i as f64 * 0.37 + shift).sin()).collect()).unwrap()
}

#[test]
fn no_discount_backs_up_to_reward() {
    for (gamma, terminal) in [(0.0, false), (0.9, true)] {
        let bt = batch(6, gamma, terminal);
        let gen = small_generator(4, 1, 3);
        let g = Graph::new();
        let bound = gen.bind(&g, false);
        let (_, x_next) =
            generated_pair(&bound, &bound, &bt, g.constant(noise(6, 0.0)), g.constant(noise(6, 1.0))).unwrap();
        assert_eq!(x_next.value(), bt.reward);
    }
}

#[test]
fn zero_generator_pairs_zero_with_reward() {
    let bt = batch(4, 0.7, false);
    let gen = zeroed(small_generator(4, 1, 0));
    let g = Graph::new();
    let bound = gen.bind(&g, false);
    let (x, x_next) =
        generated_pair(&bound, &bound, &bt, g.constant(noise(4, 0.0)), g.constant(noise(4, 1.0))).unwrap();
    assert_eq!(x.value(), Tensor::zeros(4, 1));
    assert_eq!(x_next.value(), bt.reward);
}

#[test]
fn interpolation_endpoints_and_midpoint() {
    let x = Tensor::from_rows(&[[0.0, 1.0], [3.0, -2.0]]).unwrap();
    let y = Tensor::from_rows(&[[2.0, 5.0], [1.0, 4.0]]).unwrap();
    assert_eq!(interpolate(&x, &y, &[1.0, 1.0]).unwrap(), x);
    assert_eq!(interpolate(&x, &y, &[0.0, 0.0]).unwrap(), y);
    let mid = interpolate(&x, &y, &[0.5, 0.5]).unwrap();
    assert_eq!(mid.get(0, 0), 1.0);
    assert!(interpolate(&x, &y, &[0.5]).is_err());
}

#[test]
fn unit_slope_critic_pays_no_penalty() {
    let bt = batch(5, 0.5, false);
    let critic = identity_critic(4);
    let g = Graph::new();
    let c = critic.bind(&g, true);
    let x = g.constant(Tensor::column(&[0.1, 0.2, 0.3, 0.4, 0.5]));
    let terms = critic_loss(&c, &bt.cond, x, g.constant(bt.reward.clone()), &[0.3; 5], 10.0).unwrap();
    assert!(terms.penalty_mean.abs() < 1e-15);
    let expected = (0.1 + 0.2 + 0.3 + 0.4 + 0.5 - bt.reward.sum()) / 5.0;
    assert!((terms.loss.item().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn zero_critic_loss_is_the_penalty_coefficient() {
    let bt = batch(6, 0.5, false);
    let critic = zeroed(small_critic(4, 1, 1));
    let g = Graph::new();
    let c = critic.bind(&g, true);
    let x = g.constant(Tensor::column(&[1.0, -1.0, 2.0, 0.0, 3.0, 1.5]));
    let terms = critic_loss(&c, &bt.cond, x, g.constant(bt.reward.clone()), &[0.5; 6], 0.1).unwrap();
    assert!((terms.loss.item().unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn zero_critic_gives_generator_nothing_to_follow() {
    let bt = batch(4, 0.5, false);
    let gen = small_generator(4, 1, 2);
    let critic = zeroed(small_critic(4, 1, 1));
    let g = Graph::new();
    let bound = gen.bind(&g, true);
    let (x, x_next) =
        generated_pair(&bound, &bound, &bt, g.constant(noise(4, 0.0)), g.constant(noise(4, 1.0))).unwrap();
    let loss = generator_loss(&critic.bind(&g, false), &bt.cond, x, x_next).unwrap();
    assert_eq!(loss.item().unwrap(), 0.0);
    let grads = g.backward(loss).unwrap().collect(&bound.params());
    assert!(grads.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn identity_critic_generator_loss_is_reward_minus_sample_mean() {
    // Minimising f(x') - f(x) pushes samples up towards the backed-up
    // branch; with f the identity and no discount the loss is the gap
    // between the mean reward and the mean sample.
    let bt = batch(6, 0.0, false);
    let gen = small_generator(4, 1, 5);
    let critic = identity_critic(4);
    let g = Graph::new();
    let bound = gen.bind(&g, true);
    let (x, x_next) =
        generated_pair(&bound, &bound, &bt, g.constant(noise(6, 0.0)), g.constant(noise(6, 1.0))).unwrap();
    let sample_mean = x.value().sum() / 6.0;
    let loss = generator_loss(&critic.bind(&g, false), &bt.cond, x, x_next).unwrap();
    let expected = bt.reward.sum() / 6.0 - sample_mean;
    assert!((loss.item().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn each_loss_leaves_the_other_network_untouched() {
    let bt = batch(6, 0.8, false);
    let gen = small_generator(4, 1, 7);
    let critic = small_critic(4, 1, 8);
    let g = Graph::new();
    let gb = gen.bind(&g, true);
    let cb = critic.bind(&g, true);
    let (x, x_next) = generated_pair(&gb, &gb, &bt, g.constant(noise(6, 0.0)), g.constant(noise(6, 1.0))).unwrap();

    let c_loss = critic_loss(&cb, &bt.cond, x, x_next, &[0.25; 6], 0.1).unwrap().loss;
    let grads = g.backward(c_loss).unwrap();
    for t in grads.collect(&gb.params()) {
        assert!(t.data().iter().all(|&v| v == 0.0));
    }
    assert!(grads.collect(&cb.params()).iter().any(|t| t.squared_norm() > 0.0));

    let g_loss = generator_loss(&cb, &bt.cond, x, x_next).unwrap();
    let grads = g.backward(g_loss).unwrap();
    for t in grads.collect(&cb.params()) {
        assert!(t.data().iter().all(|&v| v == 0.0));
    }
    assert!(grads.collect(&gb.params()).iter().any(|t| t.squared_norm() > 0.0));
}

#[test]
fn baseline_shifts_samples_by_the_table_value() {
    let enc = OneHotEncoder::new(2, 2);
    let gen = small_generator(enc.width(), 1, 1);
    let critic = small_critic(enc.width(), 1, 2);
    let table = TableBaseline::new(2, vec![vec![1.0], vec![2.0], vec![-3.0], vec![0.5]]).unwrap();
    let cfg = VdalConfig::new(Discount::Scalar(0.5));
    let pairs = [(0, 0), (1, 0), (1, 1)];
    let mut plain = VdalTrainer::new(cfg.clone(), enc, gen.clone(), critic.clone(), 9).unwrap();
    let mut shifted = VdalTrainer::new(cfg, enc, gen, critic, 9).unwrap();
    let a = plain.sample(&pairs, 4, None).unwrap();
    let b = shifted.sample(&pairs, 4, Some(&table)).unwrap();
    for r in 0..12 {
        let (s, act) = pairs[r / 4];
        assert!((b.get(r, 0) - a.get(r, 0) - table.get(s, act)[0]).abs() < 1e-12);
    }
    assert!(table.offsets(&[(2, 0)]).is_err());
    assert!(TableBaseline::new(2, vec![vec![1.0]; 3]).is_err());
}

#[test]
fn config_validation() {
    let ok = VdalConfig::new(Discount::Scalar(0.9));
    assert!(ok.validate().is_ok());
    for bad in [
        VdalConfig::new(Discount::Scalar(1.0)),
        VdalConfig { penalty: -1.0, ..ok.clone() },
        VdalConfig { n_critic: 0, ..ok.clone() },
        VdalConfig::new(Discount::Diagonal(vec![0.5, 1.2])),
    ] {
        assert!(matches!(bad.validate(), Err(VdalError::Config(_))));
    }
}

#[test]
fn empty_pool_is_an_error() {
    let enc = OneHotEncoder::new(1, 1);
    let mut t = VdalTrainer::new(
        VdalConfig::new(Discount::Scalar(0.5)),
        enc,
        small_generator(enc.width(), 1, 0),
        small_critic(enc.width(), 1, 0),
        0,
    )
    .unwrap();
    let err = t.train_iteration(&ReplayPool::new(10), &StoredNextAction, None);
    assert!(matches!(err, Err(VdalError::EmptyPool)));
}

#[test]
fn mismatched_networks_are_rejected() {
    let enc = OneHotEncoder::new(2, 2);
    let cfg = VdalConfig::new(Discount::Scalar(0.5));
    let r = VdalTrainer::new(cfg.clone(), enc, small_generator(3, 1, 0), small_critic(4, 1, 0), 0);
    assert!(matches!(r, Err(VdalError::Config(_))));
    let r = VdalTrainer::new(cfg, enc, small_generator(4, 2, 0), small_critic(4, 1, 0), 0);
    assert!(matches!(r, Err(VdalError::Config(_))));
}
