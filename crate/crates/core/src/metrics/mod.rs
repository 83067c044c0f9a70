//! Wasserstein-1 distances between weighted point clouds and the tabular
//! distributional Bellman operator.

mod backup;
mod distribution;
mod transport;

pub use backup::{bellman_residual, tabular_bellman_backup, sup_distance, BackupConfig, TabularZ};
pub use distribution::EmpiricalDistribution;
pub use transport::{w1, w1_exact_1d, w1_exact_discrete, w1_sliced, MAX_EXACT_PAIRS};

use thiserror::Error;

/// Random directions used by default for distances in more than one
/// dimension.
pub const DEFAULT_PROJECTIONS: usize = 50;
/// Atoms kept per state-action pair after a backup.
pub const DEFAULT_MAX_ATOMS: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("distribution needs at least one sample")]
    Empty,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("weights must be nonnegative and sum to 1 (sum {0})")]
    Weights(f64),
    #[error("exact transport limited to {max} point pairs, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("one-dimensional distance needs scalar samples, got dimension {0}")]
    NotScalar(usize),
    #[error("no distribution stored for ({state}, {action})")]
    Missing { state: usize, action: usize },
}
