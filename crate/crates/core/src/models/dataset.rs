use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major data matrix with optional binary targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<f64>,
    targets: Option<Vec<f64>>,
    m: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<f64>, feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::Data("feature dimension must be positive"));
        }
        if rows.is_empty() || rows.len() % feature_dim != 0 {
            return Err(Error::Data("row buffer is empty or not a whole number of rows"));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in data"));
        }
        let m = rows.len() / feature_dim;
        Ok(Self { rows, targets: None, m, feature_dim })
    }

    /// Attach targets; every target must be -1 or +1.
    pub fn with_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.m {
            return Err(Error::Dimension { expected: self.m, found: targets.len() });
        }
        if targets.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data("targets must be -1 or +1"));
        }
        self.targets = Some(targets);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    #[inline]
    pub fn target(&self, i: usize) -> Option<f64> {
        self.targets.as_ref().map(|t| t[i])
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Column-wise mean of the rows.
    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = alloc::vec![0.0; self.feature_dim];
        for i in 0..self.m {
            for (acc, v) in mean.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= self.m as f64;
        }
        mean
    }
}
