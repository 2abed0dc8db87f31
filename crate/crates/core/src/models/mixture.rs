use alloc::vec;
use alloc::vec::Vec;

use super::{Batch, Dataset, DriftModel};
use crate::error::{Error, Result};
use crate::math;

/// Two-parameter Gaussian mixture posterior with a `N(0, I)` prior.
///
/// Each datum is a row of scalars `iota_c`, each modelled independently as
/// `1/2 N(x1, v) + 1/2 N(x1 + x2, v)`; `v` is a variance (default 5).
#[derive(Clone, Debug)]
pub struct MixtureModel {
    data: Dataset,
    variance: f64,
    scale: f64,
    beta: f64,
}

impl MixtureModel {
    pub fn new(data: Dataset) -> Result<Self> {
        let m = data.len() as f64;
        Self::with_params(data, 5.0, 0.5, 1.0 / math::sqrt(m))
    }

    pub fn with_params(data: Dataset, variance: f64, scale: f64, beta: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::Config("mixture variance must be positive"));
        }
        Ok(Self { data, variance, scale, beta })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    #[inline]
    fn accumulate<I: Iterator<Item = usize>>(&self, x: &[f64], indices: I, count: usize, out: &mut [f64]) {
        let (x1, x2) = (x[0], x[1]);
        let inv_v = 1.0 / self.variance;
        let (mut g1, mut g2) = (0.0, 0.0);
        for i in indices {
            for &iota in self.data.row(i) {
                let r1 = iota - x1;
                let r2 = iota - x1 - x2;
                // responsibility of the (x1 + x2) component
                let w = math::sigmoid(0.5 * inv_v * (r1 * r1 - r2 * r2));
                g1 += ((1.0 - w) * r1 + w * r2) * inv_v;
                g2 += w * r2 * inv_v;
            }
        }
        let inv_s = 1.0 / count as f64;
        let inv_m = 1.0 / self.data.len() as f64;
        out[0] = self.scale * (g1 * inv_s - inv_m * x1);
        out[1] = self.scale * (g2 * inv_s - inv_m * x2);
    }
}

impl DriftModel for MixtureModel {
    fn dim(&self) -> usize {
        2
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
        let (x1, x2) = (x[0], x[1]);
        let v = self.variance;
        let log_norm = -0.5 * math::ln(core::f64::consts::TAU * v) - core::f64::consts::LN_2;
        let mut loglik = 0.0;
        for i in 0..self.data.len() {
            for &iota in self.data.row(i) {
                let a = -(iota - x1) * (iota - x1) / (2.0 * v);
                let b = -(iota - x1 - x2) * (iota - x1 - x2) / (2.0 * v);
                loglik += log_norm + math::log_add_exp(a, b);
            }
        }
        let log_prior = -0.5 * (x1 * x1 + x2 * x2) - math::ln(core::f64::consts::TAU);
        Some(self.scale * (log_prior + loglik) / self.data.len() as f64)
    }
}

/// Mixture-model drift over `batch`.
pub fn mixture_model_drift(x: &[f64], batch: &Batch, model: &MixtureModel) -> Result<Vec<f64>> {
    if x.len() != 2 {
        return Err(Error::Dimension { expected: 2, found: x.len() });
    }
    let mut out = vec![0.0; 2];
    model.estimated_drift(x, &batch.indices, &mut out);
    Ok(out)
}
