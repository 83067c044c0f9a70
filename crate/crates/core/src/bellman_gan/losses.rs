//! The adversarial objectives on a minibatch, as graph expressions.

use crate::autodiff::{Tensor, Var};
use crate::neural::{BoundCritic, BoundGenerator};

use super::VdalError;

/// A minibatch laid out as tensors. `next_scale` holds the discount of
/// each component, zeroed on terminal rows, so the backed-up branch is
/// `reward + next_scale * (G(z' | next) + next_offset)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub cond: Tensor,
    pub next_cond: Tensor,
    pub reward: Tensor,
    pub next_scale: Tensor,
    /// Constant added to generated samples; zero unless a value baseline
    /// is in use.
    pub offset: Tensor,
    pub next_offset: Tensor,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.cond.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reward_dim(&self) -> usize {
        self.reward.cols()
    }
}

/// `(x, x')`: the generated sample at `(s, a)` and the generated sample
/// at `(s', a')` pushed through the one-step backup. `next_gen` is the
/// current generator unless a frozen copy is in use.
pub fn generated_pair<'g>(
    gen: &BoundGenerator<'g>,
    next_gen: &BoundGenerator<'g>,
    batch: &Batch,
    z: Var<'g>,
    z_next: Var<'g>,
) -> Result<(Var<'g>, Var<'g>), VdalError> {
    let g = z.graph();
    let x = gen
        .forward_cond(g.constant(batch.cond.clone()), z)?
        .add(g.constant(batch.offset.clone()))?;
    let ahead = next_gen
        .forward_cond(g.constant(batch.next_cond.clone()), z_next)?
        .add(g.constant(batch.next_offset.clone()))?;
    let x_next = g
        .constant(batch.reward.clone())
        .add(ahead.mul(g.constant(batch.next_scale.clone()))?)?;
    Ok((x, x_next))
}

/// `eps * x + (1 - eps) * x'` with one `eps` per row.
pub fn interpolate(x: &Tensor, x_next: &Tensor, eps: &[f64]) -> Result<Tensor, VdalError> {
    if x.shape() != x_next.shape() || eps.len() != x.rows() {
        return Err(VdalError::Shape(format!(
            "interpolate {} and {} with {} weights",
            x.shape(),
            x_next.shape(),
            eps.len()
        )));
    }
    let mut out = x.clone();
    for (r, &w) in eps.iter().enumerate() {
        for c in 0..x.cols() {
            out.set(r, c, w * x.get(r, c) + (1.0 - w) * x_next.get(r, c));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct CriticLoss<'g> {
    pub loss: Var<'g>,
    /// Batch mean of `f(x') - f(x)`, the critic's distance estimate.
    pub distance: f64,
    pub penalty_mean: f64,
}

/// `mean(f(x) - f(x') + penalty * (|grad f(x~)| - 1)^2)`. Both samples
/// are detached, so only critic parameters receive gradients; the
/// input gradient is taken at the interpolates with the condition fixed.
pub fn critic_loss<'g>(
    critic: &BoundCritic<'g>,
    cond: &Tensor,
    x: Var<'g>,
    x_next: Var<'g>,
    eps: &[f64],
    penalty: f64,
) -> Result<CriticLoss<'g>, VdalError> {
    let g = x.graph();
    let cond = g.constant(cond.clone());
    let (x, x_next) = (x.detach(), x_next.detach());
    let fx = critic.forward_cond(cond, x)?;
    let fx_next = critic.forward_cond(cond, x_next)?;
    let gap = fx.sub(fx_next)?;

    let mixed = g.param(interpolate(&x.value(), &x_next.value(), eps)?);
    let scores = critic.forward_cond(cond, mixed)?.sum();
    let slope = g.grad_of(scores, mixed)?.row_norm();
    let pen = slope.sub(g.scalar(1.0))?.square();
    let loss = gap.add(pen.scale(penalty))?.mean();
    Ok(CriticLoss {
        loss,
        distance: -gap.value().sum() / gap.shape().rows as f64,
        penalty_mean: pen.value().sum() / pen.shape().rows as f64,
    })
}

/// `mean(f(x') - f(x))` with the critic held fixed. Both branches depend
/// on the generator.
pub fn generator_loss<'g>(
    critic: &BoundCritic<'g>,
    cond: &Tensor,
    x: Var<'g>,
    x_next: Var<'g>,
) -> Result<Var<'g>, VdalError> {
    let g = x.graph();
    let critic = critic.detached();
    let cond = g.constant(cond.clone());
    let lam = critic.forward_cond(cond, x_next)?.sub(critic.forward_cond(cond, x)?)?;
    Ok(lam.mean())
}
