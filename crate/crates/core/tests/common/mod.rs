//! Central finite-difference oracle shared by the gradient test suites.
#![allow(dead_code)]

pub mod ops;
pub mod scenarios;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdal::autodiff::{Graph, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;

/// `|a - b| / max(|a|, |b|, 1)`: relative for large gradients and absolute
/// near zero, where central differences carry roughly `h^2` noise that a
/// pure ratio would blow up.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Worst relative error between reverse-mode gradients of a scalar function
/// and central finite differences, over every entry of every input.
pub fn check_gradients<F>(f: F, inputs: &[Tensor]) -> f64
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Var<'g>,
{
    let g = Graph::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&g, &vars);
    let grads = g.backward(out).expect("scalar output").collect(&vars);

    let eval = |xs: &[Tensor]| {
        let g = Graph::new();
        let vars: Vec<Var<'_>> = xs.iter().map(|t| g.param(t.clone())).collect();
        f(&g, &vars).item().expect("scalar output")
    };

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.data()[j];
            probe[k].data_mut()[j] = orig + FD_STEP;
            let up = eval(&probe);
            probe[k].data_mut()[j] = orig - FD_STEP;
            let down = eval(&probe);
            probe[k].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads[k].data()[j], numeric));
        }
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Uniform in `[-hi, hi]` but at least `gap` away from each point in `kinks`.
pub fn away_from(rng: &mut impl Rng, rows: usize, cols: usize, hi: f64, kinks: &[f64], gap: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| loop {
            let v = rng.random_range(-hi..hi);
            if kinks.iter().all(|k| (v - k).abs() > gap) {
                break v;
            }
        })
        .collect();
    Tensor::new(rows, cols, data).unwrap()
}
