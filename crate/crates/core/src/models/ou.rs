use alloc::vec;
use alloc::vec::Vec;

use super::{Batch, Dataset, DriftModel};
use crate::error::{Error, Result};
use crate::math;

/// Ornstein-Uhlenbeck drift `b(x, batch) = -alpha x + mean(xi over batch)`.
///
/// Affine in `x` with a batch-independent linear part, so every antithetic
/// difference of this model cancels exactly.
#[derive(Clone, Debug)]
pub struct OuModel {
    data: Dataset,
    alpha: f64,
    beta: f64,
}

impl OuModel {
    /// Noise scale `1/sqrt(m)`.
    pub fn new(data: Dataset, alpha: f64) -> Result<Self> {
        let m = data.len() as f64;
        Self::with_beta(data, alpha, 1.0 / math::sqrt(m))
    }

    /// `alpha` may be zero (state-independent drift) but not negative.
    pub fn with_beta(data: Dataset, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Config("alpha must be finite and non-negative"));
        }
        Ok(Self { data, alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    #[inline]
    fn accumulate<I: Iterator<Item = usize>>(&self, x: &[f64], indices: I, count: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in indices {
            for (o, r) in out.iter_mut().zip(self.data.row(i)) {
                *o += r;
            }
        }
        let inv_s = 1.0 / count as f64;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = *o * inv_s - self.alpha * xi;
        }
    }
}

impl DriftModel for OuModel {
    fn dim(&self) -> usize {
        self.data.feature_dim()
    }

    fn data_len(&self) -> usize {
        self.data.len()
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn estimated_drift(&self, x: &[f64], batch: &[usize], out: &mut [f64]) {
        self.accumulate(x, batch.iter().copied(), batch.len(), out);
    }

    fn exact_drift(&self, x: &[f64], out: &mut [f64]) {
        let m = self.data.len();
        self.accumulate(x, 0..m, m, out);
    }

    fn log_target(&self, x: &[f64]) -> Option<f64> {
        let mean = self.data.column_means();
        Some(-0.5 * self.alpha * math::norm_sq(x) + math::dot(&mean, x))
    }
}

/// OU drift over `batch` with an explicit `alpha`.
pub fn ou_drift(x: &[f64], batch: &Batch, dataset: &Dataset, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::Config("alpha must be positive"));
    }
    if x.len() != dataset.feature_dim() {
        return Err(Error::Dimension { expected: dataset.feature_dim(), found: x.len() });
    }
    let model = OuModel::with_beta(dataset.clone(), alpha, 0.0)?;
    let mut out = vec![0.0; x.len()];
    model.estimated_drift(x, &batch.indices, &mut out);
    Ok(out)
}
