//! Drift models: an exact full-data drift `a(x)` paired with an unbiased
//! mini-batch estimator `b(x, batch)`.
//!
//! All models here are mean-form estimators, so for a batch of even size the
//! estimate over the whole batch equals the average of the estimates over its
//! two halves. The nested antithetic differences rely on that identity.

mod batch;
mod dataset;
mod logistic;
mod mixture;
mod ou;

pub use batch::{sample_batch, split_batch, Batch, BatchSampler, ReplacementMode};
pub use dataset::Dataset;
pub use logistic::{gaussian_prior_grad, logistic_posterior_drift, mixture_prior_grad, LogisticModel, Prior};
pub use mixture::{mixture_model_drift, MixtureModel};
pub use ou::{ou_drift, OuModel};

use alloc::vec;
use alloc::vec::Vec;

/// Exact drift and its mini-batch estimator over a fixed dataset.
pub trait DriftModel: Sync {
    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Number of data points `m`.
    fn data_len(&self) -> usize;

    /// Noise scale of the Langevin step.
    fn beta(&self) -> f64;

    /// `b(x, batch)`, written into `out`. The batch is a list of row indices.
    fn estimated_drift(&self, x: &[f64], batch: &[usize], out: &mut [f64]);

    /// `a(x)`: the estimator evaluated on all rows in ascending order.
    fn exact_drift(&self, x: &[f64], out: &mut [f64]);

    /// Log-density whose gradient is `exact_drift`, when one exists.
    fn log_target(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// Full-gradient ascent on the exact drift, used to place chains near the
/// posterior mode before sampling.
pub fn find_mode<M: DriftModel + ?Sized>(model: &M, x0: &[f64], iterations: usize, step: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    for _ in 0..iterations {
        model.exact_drift(&x, &mut g);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi += step * gi;
        }
    }
    x
}

/// `0..m` as a batch, for callers that want `b` over the full data.
pub fn full_batch(m: usize) -> Vec<usize> {
    (0..m).collect()
}
