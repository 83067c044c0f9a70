use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EmpiricalDistribution, MetricsError, DEFAULT_PROJECTIONS};

/// Largest `|P| * |Q|` accepted by [`w1_exact_discrete`].
pub const MAX_EXACT_PAIRS: usize = 10_000;

/// Flows and supplies below this are treated as exhausted.
const MASS_EPS: f64 = 1e-14;

fn check_dims(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<(), MetricsError> {
    if p.dim() != q.dim() {
        return Err(MetricsError::Dimension(p.dim(), q.dim()));
    }
    Ok(())
}

/// Integral of `|F_P - F_Q|` over the merged support of two weighted
/// scalar sample sets.
fn w1_scalar(p: &[f64], pw: &[f64], q: &[f64], qw: &[f64]) -> f64 {
    let mut events: Vec<(f64, f64)> = p
        .iter()
        .zip(pw)
        .map(|(x, w)| (*x, *w))
        .chain(q.iter().zip(qw).map(|(x, w)| (*x, -*w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gap = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        gap += pair[0].1;
        total += gap.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Exact W1 between scalar distributions through their CDFs.
pub fn w1_exact_1d(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64, MetricsError> {
    for d in [p, q] {
        if d.dim() != 1 {
            return Err(MetricsError::NotScalar(d.dim()));
        }
    }
    Ok(w1_scalar(&p.project(&[1.0]), p.weights(), &q.project(&[1.0]), q.weights()))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact W1 under the Euclidean ground cost, solving the transportation
/// problem by successive shortest paths with node potentials.
pub fn w1_exact_discrete(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64, MetricsError> {
    check_dims(p, q)?;
    let (n, k) = (p.len(), q.len());
    if n * k > MAX_EXACT_PAIRS {
        return Err(MetricsError::TooLarge {
            max: MAX_EXACT_PAIRS,
            got: n * k,
        });
    }
    let cost: Vec<f64> = p
        .samples()
        .iter()
        .flat_map(|x| q.samples().iter().map(move |y| euclid(x, y)))
        .collect();
    let mut flow = vec![0.0; n * k];
    let mut supply = p.weights().to_vec();
    let mut demand = q.weights().to_vec();
    // Nodes: sources 0..n, sinks n..n+k; the super-source has potential 0.
    let v = n + k;
    let mut pot = vec![0.0; v];
    let mut dist = vec![0.0; v];
    let mut pred = vec![usize::MAX; v];
    let mut done = vec![false; v];

    loop {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if supply[i] > MASS_EPS {
                dist[i] = -pot[i];
            }
        }
        for _ in 0..v {
            let Some(u) = (0..v)
                .filter(|&u| !done[u] && dist[u].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            else {
                break;
            };
            done[u] = true;
            if u < n {
                for j in (0..k).filter(|&j| !done[n + j]) {
                    let c = dist[u] + cost[u * k + j] + pot[u] - pot[n + j];
                    if c < dist[n + j] {
                        dist[n + j] = c;
                        pred[n + j] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in (0..n).filter(|&i| !done[i]) {
                    if flow[i * k + j] > MASS_EPS {
                        let c = dist[u] - cost[i * k + j] + pot[u] - pot[i];
                        if c < dist[i] {
                            dist[i] = c;
                            pred[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..k)
            .filter(|&j| demand[j] > MASS_EPS && dist[n + j].is_finite())
            .min_by(|&a, &b| (dist[n + a] + pot[n + a]).total_cmp(&(dist[n + b] + pot[n + b])));
        let Some(j_end) = target else { break };

        let reach = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for (p, d) in pot.iter_mut().zip(&dist) {
            *p += if d.is_finite() { *d } else { reach };
        }

        // Walk back to find the bottleneck.
        let mut delta = demand[j_end];
        let mut node = n + j_end;
        while pred[node] != usize::MAX {
            let prev = pred[node];
            if node < n {
                delta = delta.min(flow[node * k + (prev - n)]);
            }
            node = prev;
        }
        delta = delta.min(supply[node]);

        let mut node = n + j_end;
        while pred[node] != usize::MAX {
            let prev = pred[node];
            if node >= n {
                flow[prev * k + (node - n)] += delta;
            } else {
                let e = node * k + (prev - n);
                flow[e] -= delta;
                if flow[e] < MASS_EPS {
                    flow[e] = 0.0;
                }
            }
            node = prev;
        }
        supply[node] -= delta;
        if supply[node] < MASS_EPS {
            supply[node] = 0.0;
        }
        demand[j_end] -= delta;
        if demand[j_end] < MASS_EPS {
            demand[j_end] = 0.0;
        }
    }
    Ok(flow.iter().zip(&cost).map(|(f, c)| f * c).sum())
}

/// Mean over `n_projections` random unit directions of the exact 1-D
/// distance between the projected samples.
pub fn w1_sliced(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    n_projections: usize,
    seed: u64,
) -> Result<f64, MetricsError> {
    check_dims(p, q)?;
    let m = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_projections.max(1) {
        let dir = loop {
            let d: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break d.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        total += w1_scalar(&p.project(&dir), p.weights(), &q.project(&dir), q.weights());
    }
    Ok(total / n_projections.max(1) as f64)
}

/// Exact in one dimension, sliced with the default projection count above.
pub fn w1(p: &EmpiricalDistribution, q: &EmpiricalDistribution, seed: u64) -> Result<f64, MetricsError> {
    check_dims(p, q)?;
    if p.dim() == 1 {
        w1_exact_1d(p, q)
    } else {
        w1_sliced(p, q, DEFAULT_PROJECTIONS, seed)
    }
}
