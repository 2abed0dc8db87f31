//! Paired-seed variance table: antithetic against plain coupling, level by level.

use std::path::Path;

use masga_core::adaptive::LevelShape;
use masga_core::estimators::{delta_ant_phi, delta_phi_plain, LevelSampler, LevelStats};
use masga_core::sde::ChainLabel;
use masga_core::DriftModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COMPARE_HEADER: [&str; 7] =
    ["ell1", "ell2", "n", "mean_antithetic", "var_antithetic", "var_plain", "var_level"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub ell1: u32,
    pub ell2: u32,
    pub n: u64,
    pub mean_antithetic: f64,
    pub var_antithetic: f64,
    pub var_plain: f64,
    /// Variance of `f` at the level's finest chain.
    pub var_level: f64,
}

/// Samples for `paths` seeds per level; both couplings see the same Brownian
/// increments and the same finest-chain batches.
pub fn compare_levels<M: DriftModel + ?Sized>(
    sampler: &LevelSampler<'_, M>,
    shape: LevelShape,
    max_level: u32,
    paths: u64,
) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for level in shape.levels(max_level) {
        sampler.check_level(level)?;
        let samples: Vec<masga_core::error::Result<(f64, f64, f64)>> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let c = sampler.cluster(level, p)?;
                let pl = sampler.plain_cluster(level, p)?;
                let ff = c.position(ChainLabel::FF).map(|x| sampler.f.eval(x)).unwrap_or(f64::NAN);
                Ok((delta_ant_phi(&sampler.f, &c), delta_phi_plain(&sampler.f, &pl), ff))
            })
            .collect();
        let mut ant = LevelStats::new(level, 0.0);
        let mut plain = LevelStats::new(level, 0.0);
        let mut fine = LevelStats::new(level, 0.0);
        for s in samples {
            let (a, p, f) = s?;
            ant.push(a);
            plain.push(p);
            fine.push(f);
        }
        let var = |s: &LevelStats| s.variance().unwrap_or(f64::NAN);
        rows.push(CompareRow {
            ell1: level.ell1,
            ell2: level.ell2,
            n: paths,
            mean_antithetic: ant.mean,
            var_antithetic: var(&ant),
            var_plain: var(&plain),
            var_level: var(&fine),
        });
    }
    Ok(rows)
}

pub fn write_compare(path: &Path, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(COMPARE_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
