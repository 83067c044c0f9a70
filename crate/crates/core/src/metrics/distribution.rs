use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;

const WEIGHT_TOL: f64 = 1e-12;

/// A finite weighted sample set in `R^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    samples: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Weights are renormalized when their sum is within `1e-9` of 1.
    pub fn new(samples: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MetricsError> {
        let dim = samples.first().ok_or(MetricsError::Empty)?.len();
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(MetricsError::Dimension(dim, bad.len()));
        }
        if weights.len() != samples.len() {
            return Err(MetricsError::Dimension(samples.len(), weights.len()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(MetricsError::Weights(total));
        }
        let weights = if (total - 1.0).abs() > WEIGHT_TOL {
            weights.iter().map(|w| w / total).collect()
        } else {
            weights
        };
        Ok(EmpiricalDistribution { samples, weights })
    }

    pub fn uniform(samples: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        let n = samples.len();
        Self::new(samples, vec![1.0 / n.max(1) as f64; n])
    }

    /// Uniform over scalar samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self, MetricsError> {
        Self::uniform(values.iter().map(|v| vec![*v]).collect())
    }

    pub fn point(x: Vec<f64>) -> Self {
        EmpiricalDistribution {
            samples: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (x, w) in self.samples.iter().zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m
    }

    /// Every sample translated by `offset`.
    pub fn shifted(&self, offset: &[f64]) -> Result<Self, MetricsError> {
        if offset.len() != self.dim() {
            return Err(MetricsError::Dimension(self.dim(), offset.len()));
        }
        Ok(EmpiricalDistribution {
            samples: self
                .samples
                .iter()
                .map(|x| x.iter().zip(offset).map(|(a, b)| a + b).collect())
                .collect(),
            weights: self.weights.clone(),
        })
    }

    /// Columns `start..end` of every sample.
    pub fn marginal(&self, start: usize, end: usize) -> Self {
        EmpiricalDistribution {
            samples: self.samples.iter().map(|x| x[start..end].to_vec()).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Scalar projections onto `direction`.
    pub fn project(&self, direction: &[f64]) -> Vec<f64> {
        self.samples
            .iter()
            .map(|x| x.iter().zip(direction).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `n` draws with replacement in proportion to the weights, as a
    /// uniform distribution.
    pub fn resample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Self {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let samples = (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let i = cdf.partition_point(|c| *c <= u).min(self.len() - 1);
                self.samples[i].clone()
            })
            .collect();
        EmpiricalDistribution {
            samples,
            weights: vec![1.0 / n as f64; n],
        }
    }
}
