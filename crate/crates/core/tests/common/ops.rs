//! Every differentiable op with an input generator, for the
//! finite-difference suites.

use vdal::autodiff::{Graph, Tensor, Var};

use super::{away_from, rng, uniform};

/// Contracts a tensor-valued result with fixed random weights so every
/// output entry contributes a distinct cotangent.
pub fn contract<'g>(y: Var<'g>, seed: u64) -> Var<'g> {
    let s = y.shape();
    let w = uniform(&mut rng(seed ^ 0x5eed), s.rows, s.cols, -1.0, 1.0);
    y.mul(y.graph().constant(w)).unwrap().sum()
}

pub type Case = (&'static str, fn(&mut rand_chacha::ChaCha8Rng) -> Vec<Tensor>, for<'g> fn(&'g Graph, &[Var<'g>]) -> Var<'g>);

fn smooth(r: &mut rand_chacha::ChaCha8Rng) -> Vec<Tensor> {
    vec![uniform(r, 3, 4, -2.0, 2.0), uniform(r, 3, 4, -2.0, 2.0)]
}

pub fn cases() -> Vec<Case> {
    vec![
        ("add", smooth, |_, v| contract(v[0].add(v[1]).unwrap(), 1)),
        ("sub", smooth, |_, v| contract(v[0].sub(v[1]).unwrap(), 2)),
        ("mul", smooth, |_, v| contract(v[0].mul(v[1]).unwrap(), 3)),
        (
            "scalar broadcast",
            |r| vec![uniform(r, 3, 4, -2.0, 2.0), uniform(r, 1, 1, -2.0, 2.0)],
            |_, v| contract(v[0].mul(v[1]).unwrap().add(v[1]).unwrap(), 4),
        ),
        (
            "safe_div",
            |r| vec![uniform(r, 3, 4, -2.0, 2.0), uniform(r, 3, 4, 0.5, 2.0)],
            |_, v| contract(v[0].safe_div(v[1]).unwrap(), 5),
        ),
        ("scale", smooth, |_, v| contract(v[0].scale(-1.7), 6)),
        ("neg", smooth, |_, v| contract(v[1].neg(), 7)),
        (
            "matmul",
            |r| vec![uniform(r, 3, 4, -1.0, 1.0), uniform(r, 4, 5, -1.0, 1.0)],
            |_, v| contract(v[0].matmul(v[1]).unwrap(), 8),
        ),
        (
            "matmul transposed",
            |r| vec![uniform(r, 4, 3, -1.0, 1.0), uniform(r, 5, 4, -1.0, 1.0)],
            |_, v| contract(v[0].matmul_t(v[1], true, true).unwrap(), 9),
        ),
        (
            "add_row",
            |r| vec![uniform(r, 3, 4, -1.0, 1.0), uniform(r, 1, 4, -1.0, 1.0)],
            |_, v| contract(v[0].add_row(v[1]).unwrap(), 10),
        ),
        ("sum", smooth, |_, v| v[0].mul(v[1]).unwrap().sum()),
        ("mean", smooth, |_, v| v[0].mul(v[1]).unwrap().mean().scale(3.0)),
        ("sum_rows", smooth, |_, v| contract(v[0].mul(v[1]).unwrap().sum_rows(), 11)),
        ("mean_rows", smooth, |_, v| contract(v[0].mul(v[1]).unwrap().mean_rows(), 12)),
        (
            "repeat_rows",
            |r| vec![uniform(r, 1, 4, -1.0, 1.0)],
            |_, v| contract(v[0].repeat_rows(3).square(), 13),
        ),
        ("sum_cols", smooth, |_, v| contract(v[0].mul(v[1]).unwrap().sum_cols(), 14)),
        (
            "repeat_cols",
            |r| vec![uniform(r, 3, 1, -1.0, 1.0)],
            |_, v| contract(v[0].repeat_cols(4).square(), 15),
        ),
        ("slice_cols", smooth, |_, v| contract(v[0].mul(v[1]).unwrap().slice_cols(1, 3), 16)),
        (
            "concat",
            |r| vec![uniform(r, 3, 2, -1.0, 1.0), uniform(r, 3, 3, -1.0, 1.0)],
            |g, v| contract(g.concat(&[v[0].square(), v[1], v[0]]).unwrap(), 17),
        ),
        (
            "leaky_relu",
            |r| vec![away_from(r, 3, 4, 2.0, &[0.0], 1e-3)],
            |_, v| contract(v[0].leaky_relu(0.2), 18),
        ),
        (
            "relu",
            |r| vec![away_from(r, 3, 4, 2.0, &[0.0], 1e-3)],
            |_, v| contract(v[0].relu(), 19),
        ),
        ("square", smooth, |_, v| contract(v[0].square(), 20)),
        (
            "row_norm",
            |r| vec![uniform(r, 3, 4, 0.2, 2.0)],
            |_, v| contract(v[0].row_norm(), 21),
        ),
        (
            "clamp",
            |r| vec![away_from(r, 3, 4, 2.0, &[-0.5, 0.5], 1e-3)],
            |_, v| contract(v[0].clamp(-0.5, 0.5), 22),
        ),
        (
            "huber",
            |r| {
                let target = uniform(r, 3, 4, -2.0, 2.0);
                let off = away_from(r, 3, 4, 3.0, &[-1.0, 1.0], 1e-3);
                vec![off.zip_map(&target, "add", |a, b| a + b).unwrap(), target]
            },
            |_, v| v[0].huber(v[1], 1.0).unwrap(),
        ),
    ]
}
