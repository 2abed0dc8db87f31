use masga_core::{Dataset, DriftModel, LogisticModel, MixtureModel, OuModel, Prior};

use crate::config::{DataSource, ExperimentConfig, ModelKind};
use crate::dataset::{gen_synthetic, load_dataset, load_features, SyntheticSpec};
use crate::error::Result;

/// Any of the built-in drift models.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Logistic(LogisticModel),
    Mixture(MixtureModel),
    Ou(OuModel),
}

impl AnyModel {
    fn inner(&self) -> &dyn DriftModel {
        match self {
            AnyModel::Logistic(m) => m,
            AnyModel::Mixture(m) => m,
            AnyModel::Ou(m) => m,
        }
    }
}

impl DriftModel for AnyModel {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn data_len(&self) -> usize {
        self.inner().data_len()
    }
    fn beta(&self) -> f64 {
        self.inner().beta()
    }
    fn estimated_drift(&self, x: &[f64], batch: &[usize], out: &mut [f64]) {
        self.inner().estimated_drift(x, batch, out)
    }
    fn exact_drift(&self, x: &[f64], out: &mut [f64]) {
        self.inner().exact_drift(x, out)
    }
    fn log_target(&self, x: &[f64]) -> Option<f64> {
        self.inner().log_target(x)
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        DataSource::File(p) if matches!(cfg.model, ModelKind::LogisticGaussian | ModelKind::LogisticMixture) => {
            load_dataset(p)
        }
        DataSource::File(p) => load_features(p),
        DataSource::Synthetic { m, d, seed } => {
            gen_synthetic(&SyntheticSpec { kind: cfg.model.synthetic_kind(), m: *m, d: *d, seed: *seed })
        }
    }
}

pub fn build_model(cfg: &ExperimentConfig, data: Dataset) -> Result<AnyModel> {
    let m = data.len() as f64;
    Ok(match cfg.model {
        ModelKind::LogisticGaussian => AnyModel::Logistic(LogisticModel::new(data, Prior::Gaussian)?),
        ModelKind::LogisticMixture => AnyModel::Logistic(LogisticModel::new(data, Prior::Mixture)?),
        ModelKind::GaussianMixture2d => {
            AnyModel::Mixture(MixtureModel::with_params(data, cfg.mixture_variance, 0.5, 1.0 / m.sqrt())?)
        }
        ModelKind::Ou => AnyModel::Ou(OuModel::new(data, cfg.ou_alpha)?),
    })
}
