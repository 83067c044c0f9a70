mod common;

use common::ops::{cases, contract};
use common::{check_gradients, rng, uniform};
use proptest::prelude::*;
use rand::Rng;
use vdal::autodiff::{Graph, Tensor, Var};
use vdal::neural::{Activation, CriticNet, CriticSpec, GeneratorNet, GeneratorSpec, Mlp, MlpSpec, OneHotEncoder};

const TRIALS: u64 = 20;
const FIRST_ORDER_TOL: f64 = 1e-4;
const SECOND_ORDER_TOL: f64 = 1e-3;

#[test]
fn every_op_matches_finite_differences() {
    for (name, inputs, f) in cases() {
        for trial in 0..TRIALS {
            let xs = inputs(&mut rng(trial * 7919 + name.len() as u64));
            let err = check_gradients(f, &xs);
            assert!(err < FIRST_ORDER_TOL, "{name} trial {trial}: error {err:e}");
        }
    }
}

/// Differentiating through `grad_of` exercises every backward rule as a
/// forward computation.
#[test]
fn every_op_second_order_matches_finite_differences() {
    for (name, inputs, f) in cases() {
        for trial in 0..5 {
            let xs = inputs(&mut rng(trial * 104_729 + name.len() as u64));
            let err = check_gradients(
                |g, v| {
                    let y = f(g, v);
                    let d = g.grad_of(y, v[0]).unwrap();
                    contract(d, 99).add(d.square().sum()).unwrap()
                },
                &xs,
            );
            assert!(err < SECOND_ORDER_TOL, "{name} trial {trial}: error {err:e}");
        }
    }
}

fn mlp_inputs(seed: u64) -> (Mlp, Tensor) {
    let spec = MlpSpec {
        input_dim: 4,
        layer_widths: vec![6, 5, 2],
        activation: Activation::LeakyRelu(0.2),
        output_activation: Activation::Linear,
    };
    let mlp = Mlp::new(spec, &mut rng(seed)).unwrap();
    let mut r = rng(seed + 1);
    loop {
        let x = uniform(&mut r, 7, 4, -1.0, 1.0);
        if kink_margin(&mlp, &x) > 1e-4 {
            return (mlp, x);
        }
    }
}

/// Smallest |pre-activation| over the hidden layers; finite differences are
/// only meaningful when no activation kink lies within the step.
fn kink_margin(mlp: &Mlp, x: &Tensor) -> f64 {
    let mut h = x.clone();
    let mut margin = f64::INFINITY;
    let n = mlp.layers().len();
    for layer in &mlp.layers()[..n - 1] {
        let mut pre = h.matmul(&layer.weight).unwrap();
        for r in 0..pre.rows() {
            for c in 0..pre.cols() {
                pre.set(r, c, pre.get(r, c) + layer.bias.get(0, c));
            }
        }
        margin = pre.data().iter().fold(margin, |m, v| m.min(v.abs()));
        h = pre.map(|v| if v >= 0.0 { v } else { 0.2 * v });
    }
    margin
}

/// Builds `mlp` over graph leaves so finite differences can perturb weights.
fn mlp_forward<'g>(mlp: &Mlp, weights: &[Var<'g>], x: Var<'g>) -> Var<'g> {
    let mut h = x;
    let n = mlp.layers().len();
    for (i, pair) in weights.chunks(2).enumerate() {
        h = h.matmul(pair[0]).unwrap().add_row(pair[1]).unwrap();
        if i + 1 < n {
            h = h.leaky_relu(0.2);
        }
    }
    h
}

fn flat_params(mlp: &Mlp) -> Vec<Tensor> {
    mlp.layers()
        .iter()
        .flat_map(|l| [l.weight.clone(), l.bias.clone()])
        .collect()
}

#[test]
fn three_layer_mlp_matches_finite_differences() {
    for seed in 0..TRIALS {
        let (mlp, x) = mlp_inputs(seed);
        let mut inputs = flat_params(&mlp);
        inputs.push(x);
        let err = check_gradients(
            |_, v| {
                let n = v.len() - 1;
                contract(mlp_forward(&mlp, &v[..n], v[n]), seed)
            },
            &inputs,
        );
        assert!(err < FIRST_ORDER_TOL, "seed {seed}: error {err:e}");
    }
}

#[test]
fn bound_mlp_agrees_with_manual_wiring() {
    let (mlp, x) = mlp_inputs(3);
    let g = Graph::new();
    let bound = mlp.bind(&g, true);
    let y = bound.forward(g.constant(x.clone())).unwrap();
    let loss = contract(y, 3);
    let grads = g.backward(loss).unwrap().collect(&bound.params());
    let g2 = Graph::new();
    let leaves: Vec<Var<'_>> = flat_params(&mlp).into_iter().map(|t| g2.param(t)).collect();
    let y2 = mlp_forward(&mlp, &leaves, g2.constant(x));
    let grads2 = g2.backward(contract(y2, 3)).unwrap().collect(&leaves);
    for (a, b) in grads.iter().zip(&grads2) {
        assert!(a.max_abs_diff(b) < 1e-12);
    }
}

/// Gradient penalty `mean((||grad_x f(x)|| - 1)^2)` differentiated with
/// respect to the critic weights.
#[test]
fn gradient_penalty_matches_finite_differences() {
    for seed in 0..TRIALS {
        let spec = MlpSpec {
            input_dim: 3,
            layer_widths: vec![8, 6, 1],
            activation: Activation::LeakyRelu(0.2),
            output_activation: Activation::Linear,
        };
        let mlp = Mlp::new(spec, &mut rng(seed + 500)).unwrap();
        let x = uniform(&mut rng(seed + 900), 5, 3, -1.0, 1.0);
        let params = flat_params(&mlp);
        let err = check_gradients(
            |g, v| {
                let xt = g.param(x.clone());
                let f = mlp_forward(&mlp, v, xt).sum();
                let gx = g.grad_of(f, xt).unwrap();
                let one = g.scalar(1.0);
                gx.row_norm().sub(one).unwrap().square().mean()
            },
            &params,
        );
        assert!(err < SECOND_ORDER_TOL, "seed {seed}: error {err:e}");
    }
}

#[test]
fn generator_and_critic_match_finite_differences() {
    let enc = OneHotEncoder::new(3, 2);
    let cond = enc.encode(&[(0, 1), (2, 0), (1, 1), (0, 0)]);
    for seed in 0..5 {
        let gen = GeneratorNet::new(
            GeneratorSpec {
                cond_dim: 5,
                embed_widths: vec![4, 4],
                trunk_widths: vec![6],
                noise_dim: 2,
                output_dim: 2,
            },
            seed,
        )
        .unwrap();
        let critic = CriticNet::new(
            CriticSpec {
                cond_dim: 5,
                embed_widths: vec![4],
                trunk_widths: vec![5],
                sample_dim: 2,
            },
            seed + 50,
        )
        .unwrap();
        let z = uniform(&mut rng(seed), 4, 2, -1.5, 1.5);
        let err = check_gradients(
            |g, v| {
                let x = gen.bind(g, false).forward_cond(g.constant(cond.clone()), v[0]).unwrap();
                critic.bind(g, false).forward_cond(g.constant(cond.clone()), x).unwrap().sum()
            },
            &[z],
        );
        assert!(err < FIRST_ORDER_TOL, "seed {seed}: error {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let x = uniform(&mut r, 3, 3, -1.0, 1.0);
        let w = uniform(&mut r, 3, 3, -1.0, 1.0);
        let k: f64 = r.random_range(0.1..2.0);

        let grad = |ca: f64, cb: f64| {
            let g = Graph::new();
            let xv = g.param(x.clone());
            let wv = g.constant(w.clone());
            let f = xv.matmul(wv).unwrap().leaky_relu(0.2).square().sum();
            let h = xv.row_norm().scale(k).sum().add(xv.mul(xv).unwrap().mean()).unwrap();
            let out = f.scale(ca).add(h.scale(cb)).unwrap();
            g.backward(out).unwrap().wrt(xv)
        };
        let combined = grad(a, b);
        let fa = grad(1.0, 0.0);
        let gb = grad(0.0, 1.0);
        let expect = fa.zip_map(&gb, "lin", |p, q| a * p + b * q).unwrap();
        prop_assert!(combined.max_abs_diff(&expect) < 1e-10);
    }
}

