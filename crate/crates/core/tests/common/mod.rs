#![allow(dead_code)]

use masga_core::models::find_mode;
use masga_core::rng::{NoiseSource, Role};
use masga_core::{Dataset, LogisticModel, OuModel, Prior};

/// Logistic regression data with standard normal features and labels drawn
/// from a logistic link around a random parameter.
pub fn logistic_data(m: usize, d: usize, seed: u64) -> Dataset {
    let mut n = NoiseSource::from_seed(seed, Role::Custom(99));
    let mut truth = vec![0.0; d];
    n.fill_gaussian(&mut truth);
    let mut rows = vec![0.0; m * d];
    n.fill_gaussian(&mut rows);
    let targets = rows
        .chunks_exact(d)
        .map(|r| {
            let z: f64 = r.iter().zip(&truth).map(|(a, b)| a * b).sum();
            if n.uniform() < 1.0 / (1.0 + (-z).exp()) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Dataset::new(rows, d).unwrap().with_targets(targets).unwrap()
}

pub fn logistic_model(m: usize, d: usize, seed: u64) -> (LogisticModel, Vec<f64>) {
    let model = LogisticModel::new(logistic_data(m, d, seed), Prior::Gaussian).unwrap();
    let x0 = find_mode(&model, &vec![0.0; d], 500, 0.2);
    (model, x0)
}

pub fn ou_model(m: usize, alpha: f64, seed: u64) -> OuModel {
    let mut n = NoiseSource::from_seed(seed, Role::Custom(98));
    let rows: Vec<f64> = (0..m).map(|_| 1.0 + n.gaussian()).collect();
    OuModel::new(Dataset::new(rows, 1).unwrap(), alpha).unwrap()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
