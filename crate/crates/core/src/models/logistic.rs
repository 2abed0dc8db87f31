use alloc::vec;
use alloc::vec::Vec;

use super::{Batch, Dataset, DriftModel};
use crate::error::{Error, Result};
use crate::math;

/// Prior on the regression weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Prior {
    /// `N(0, I)`.
    #[default]
    Gaussian,
    /// `1/2 N(0, I) + 1/2 N(1, I)`.
    Mixture,
}

impl Prior {
    fn log_density(self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let norm = -0.5 * d * math::ln(core::f64::consts::TAU);
        match self {
            Prior::Gaussian => norm - 0.5 * math::norm_sq(x),
            Prior::Mixture => {
                let a = -0.5 * math::norm_sq(x);
                let b = -0.5 * x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>();
                norm + math::log_add_exp(a, b) - core::f64::consts::LN_2
            }
        }
    }

    /// Responsibility of the mean-one component (0 for the Gaussian prior).
    #[inline]
    fn shift_weight(self, x: &[f64]) -> f64 {
        match self {
            Prior::Gaussian => 0.0,
            Prior::Mixture => math::sigmoid(x.iter().sum::<f64>() - 0.5 * x.len() as f64),
        }
    }
}

/// `grad log N(0, I)(x) = -x`.
pub fn gaussian_prior_grad(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

/// Gradient of `log(1/2 N(0, I) + 1/2 N(1, I))`: `-x + w(x) 1` where `w` is
/// the responsibility of the mean-one component.
pub fn mixture_prior_grad(x: &[f64]) -> Vec<f64> {
    let w = Prior::Mixture.shift_weight(x);
    x.iter().map(|v| -v + w).collect()
}

/// Bayesian logistic regression, `p(y | iota, x) = g(y x^T iota)`.
///
/// The drift is `scale * [(1/m) grad log pi0(x) + (1/s) sum_i y_i iota_i g(-y_i x^T iota_i)]`;
/// with `scale = 1/2` and `beta = 1/sqrt(m)` the Langevin chain targets the
/// posterior.
#[derive(Clone, Debug)]
pub struct LogisticModel {
    data: Dataset,
    prior: Prior,
    scale: f64,
    beta: f64,
}

impl LogisticModel {
    /// Posterior sampler with the standard `1/2` drift scale and `1/sqrt(m)` noise.
    pub fn new(data: Dataset, prior: Prior) -> Result<Self> {
        let m = data.len() as f64;
        Self::with_scaling(data, prior, 0.5, 1.0 / math::sqrt(m))
    }

    pub fn with_scaling(data: Dataset, prior: Prior, scale: f64, beta: f64) -> Result<Self> {
        if data.targets().is_none() {
            return Err(Error::Data("logistic model needs +-1 targets"));
        }
        Ok(Self { data, prior, scale, beta })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn prior(&self) -> Prior {
        self.prior
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Bracketed drift over `indices`, unscaled.
    #[inline]
    fn bracket<I: Iterator<Item = usize>>(&self, x: &[f64], indices: I, count: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let targets = self.data.targets().expect("checked at construction");
        for i in indices {
            let row = self.data.row(i);
            let y = targets[i];
            let z = y * math::dot(x, row);
            // y * (1 - g(z)) = y * g(-z)
            let w = y * math::sigmoid(-z);
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        let inv_s = 1.0 / count as f64;
        let inv_m = 1.0 / self.data.len() as f64;
        let shift = self.prior.shift_weight(x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = *o * inv_s + inv_m * (shift - xi);
        }
    }
}

impl DriftModel for LogisticModel {
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
        self.bracket(x, batch.iter().copied(), batch.len(), out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn exact_drift(&self, x: &[f64], out: &mut [f64]) {
        let m = self.data.len();
        self.bracket(x, 0..m, m, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn log_target(&self, x: &[f64]) -> Option<f64> {
        let m = self.data.len();
        let targets = self.data.targets()?;
        let mut loglik = 0.0;
        for (i, &y) in targets.iter().enumerate() {
            let z = y * math::dot(x, self.data.row(i));
            // log g(z) = -log(1 + e^-z)
            loglik -= math::log_add_exp(0.0, -z);
        }
        Some(self.scale * (self.prior.log_density(x) + loglik) / m as f64)
    }
}

/// The bracketed logistic drift `(1/m) grad log pi0(x) + (1/s) sum grad log g(y x^T iota)`
/// over `batch`, without the step scale.
pub fn logistic_posterior_drift(x: &[f64], batch: &Batch, dataset: &Dataset, prior: Prior) -> Result<Vec<f64>> {
    if x.len() != dataset.feature_dim() {
        return Err(Error::Dimension { expected: dataset.feature_dim(), found: x.len() });
    }
    if batch.is_empty() {
        return Err(Error::Data("empty batch"));
    }
    if let Some(&bad) = batch.indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(Error::Range { s: bad, m: dataset.len() });
    }
    let model = LogisticModel::with_scaling(dataset.clone(), prior, 1.0, 0.0)?;
    let mut out = vec![0.0; x.len()];
    model.bracket(x, batch.indices.iter().copied(), batch.len(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ReplacementMode;
    use alloc::vec;

    fn single() -> Dataset {
        Dataset::new(vec![0.3, -1.2], 2).unwrap().with_targets(vec![1.0]).unwrap()
    }

    #[test]
    fn origin_single_datum_gives_half_feature() {
        let data = single();
        let b = Batch { indices: vec![0], mode: ReplacementMode::Without };
        let g = logistic_posterior_drift(&[0.0, 0.0], &b, &data, Prior::Gaussian).unwrap();
        assert_eq!(g, vec![0.15, -0.6]);
    }

    #[test]
    fn priors_at_reference_points() {
        assert_eq!(gaussian_prior_grad(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        let g = mixture_prior_grad(&[0.5; 4]);
        assert!(g.iter().all(|v| v.abs() < 1e-15), "{g:?}");
        let far = mixture_prior_grad(&[10.0; 3]);
        assert!(far.iter().all(|v| (v - (1.0 - 10.0)).abs() < 1e-10), "{far:?}");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let b = Batch { indices: vec![0], mode: ReplacementMode::Without };
        let err = logistic_posterior_drift(&[0.0], &b, &single(), Prior::Gaussian).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 2, found: 1 });
    }
}
