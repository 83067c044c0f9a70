use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{w1, EmpiricalDistribution, MetricsError, DEFAULT_MAX_ATOMS};
use crate::environments::{Discount, Environment, FiniteMdp, Policy};

/// A return distribution for every state-action pair.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularZ {
    n_states: usize,
    n_actions: usize,
    dists: Vec<EmpiricalDistribution>,
}

impl TabularZ {
    pub fn from_fn(
        n_states: usize,
        n_actions: usize,
        mut f: impl FnMut(usize, usize) -> EmpiricalDistribution,
    ) -> Self {
        let dists = (0..n_states)
            .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
            .map(|(s, a)| f(s, a))
            .collect();
        TabularZ {
            n_states,
            n_actions,
            dists,
        }
    }

    /// Every pair holds `n_atoms` uniform draws from `[lo, hi]^dim`.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        dim: usize,
        n_atoms: usize,
        range: (f64, f64),
        rng: &mut R,
    ) -> Self {
        Self::from_fn(n_states, n_actions, |_, _| {
            let samples = (0..n_atoms)
                .map(|_| (0..dim).map(|_| rng.random_range(range.0..range.1)).collect())
                .collect();
            EmpiricalDistribution::uniform(samples).expect("non-empty")
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, state: usize, action: usize) -> Result<&EmpiricalDistribution, MetricsError> {
        if state >= self.n_states || action >= self.n_actions {
            return Err(MetricsError::Missing { state, action });
        }
        Ok(&self.dists[state * self.n_actions + action])
    }

    pub fn set(&mut self, state: usize, action: usize, dist: EmpiricalDistribution) -> Result<(), MetricsError> {
        if state >= self.n_states || action >= self.n_actions {
            return Err(MetricsError::Missing { state, action });
        }
        self.dists[state * self.n_actions + action] = dist;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackupConfig {
    pub discount: Discount,
    /// Pushforward supports larger than this are resampled down to it.
    pub max_atoms: usize,
    pub seed: u64,
}

impl BackupConfig {
    pub fn new(discount: Discount) -> Self {
        BackupConfig {
            discount,
            max_atoms: DEFAULT_MAX_ATOMS,
            seed: 0,
        }
    }
}

/// The distribution of `r + discount * Z(s', a')` with `s'` from the
/// kernel and `a'` from `policy`, for every pair. Terminal transitions
/// contribute the reward alone.
pub fn tabular_bellman_backup<P: Policy>(
    z: &TabularZ,
    mdp: &FiniteMdp,
    policy: &P,
    config: &BackupConfig,
) -> Result<TabularZ, MetricsError> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if z.n_states != ns || z.n_actions != na {
        return Err(MetricsError::Missing {
            state: ns.min(z.n_states),
            action: na.min(z.n_actions),
        });
    }
    let m = mdp.reward_dim();
    let factors = config.discount.factors(m);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dists = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let mut samples = Vec::new();
            let mut weights = Vec::new();
            for o in mdp.outcomes(s, a) {
                if o.terminal {
                    samples.push(o.reward.clone());
                    weights.push(o.prob);
                    continue;
                }
                for (a2, pa) in policy.probabilities(o.next).into_iter().enumerate() {
                    if pa <= 0.0 {
                        continue;
                    }
                    let next = z.get(o.next, a2)?;
                    if next.dim() != m {
                        return Err(MetricsError::Dimension(m, next.dim()));
                    }
                    for (x, w) in next.samples().iter().zip(next.weights()) {
                        samples.push(
                            o.reward
                                .iter()
                                .zip(x)
                                .zip(&factors)
                                .map(|((r, xi), g)| r + g * xi)
                                .collect(),
                        );
                        weights.push(o.prob * pa * w);
                    }
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mut dist = EmpiricalDistribution::new(samples, weights)?;
            if dist.len() > config.max_atoms {
                dist = dist.resample(config.max_atoms, &mut rng);
            }
            dists.push(dist);
        }
    }
    Ok(TabularZ {
        n_states: ns,
        n_actions: na,
        dists,
    })
}

/// `sup_{s,a} W1(Z1(s,a), Z2(s,a))`, exact for scalar returns and sliced
/// otherwise.
pub fn sup_distance(z1: &TabularZ, z2: &TabularZ, seed: u64) -> Result<f64, MetricsError> {
    if z1.n_states != z2.n_states || z1.n_actions != z2.n_actions {
        return Err(MetricsError::Dimension(z1.dists.len(), z2.dists.len()));
    }
    let mut worst: f64 = 0.0;
    for (p, q) in z1.dists.iter().zip(&z2.dists) {
        worst = worst.max(w1(p, q, seed)?);
    }
    Ok(worst)
}

/// Distance from `z` to its own backup; zero exactly at the fixed point.
pub fn bellman_residual<P: Policy>(
    z: &TabularZ,
    mdp: &FiniteMdp,
    policy: &P,
    config: &BackupConfig,
) -> Result<f64, MetricsError> {
    let backed = tabular_bellman_backup(z, mdp, policy, config)?;
    sup_distance(z, &backed, config.seed)
}
