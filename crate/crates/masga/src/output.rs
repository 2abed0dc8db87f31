//! Result files: `levels.csv`, `convergence.csv`, `report.json`.

use std::fs;
use std::path::Path;

use masga_core::adaptive::EstimatorReport;
use masga_core::estimators::{LevelStats, MultiIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEVELS_HEADER: [&str; 6] = ["ell1", "ell2", "n", "mean", "var", "cost_per_path"];
pub const CONVERGENCE_HEADER: [&str; 5] = ["eps", "estimate", "total_cost", "cost_times_eps2", "L"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub ell1: u32,
    pub ell2: u32,
    pub n: u64,
    pub mean: f64,
    pub var: f64,
    pub cost_per_path: f64,
}

impl From<&LevelStats> for LevelRow {
    fn from(s: &LevelStats) -> Self {
        Self {
            ell1: s.level.ell1,
            ell2: s.level.ell2,
            n: s.n,
            mean: s.mean,
            var: s.variance().unwrap_or(f64::NAN),
            cost_per_path: s.cost_per_path,
        }
    }
}

impl LevelRow {
    /// Statistics with the same count, mean and variance.
    pub fn to_stats(&self) -> LevelStats {
        let mut s = LevelStats::new(MultiIndex::new(self.ell1, self.ell2), self.cost_per_path);
        s.n = self.n;
        s.mean = self.mean;
        s.m2 = if self.n >= 2 { self.var * (self.n - 1) as f64 } else { 0.0 };
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub estimate: f64,
    pub total_cost: f64,
    pub cost_times_eps2: f64,
    #[serde(rename = "L")]
    pub levels: u32,
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "NaN".into()
    }
}

pub fn write_levels(path: &Path, rows: &[LevelRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LEVELS_HEADER)?;
    for r in rows {
        w.write_record([
            r.ell1.to_string(),
            r.ell2.to_string(),
            r.n.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.var),
            fmt_f64(r.cost_per_path),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: format!("{}: expected header {}", path.display(), expected.join(",")),
        });
    }
    Ok(())
}

pub fn read_levels(path: &Path) -> Result<Vec<LevelRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    check_header(path, r.headers()?, &LEVELS_HEADER)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.eps),
            fmt_f64(r.estimate),
            fmt_f64(r.total_cost),
            fmt_f64(r.cost_times_eps2),
            r.levels.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_convergence(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(path, r.headers()?, &CONVERGENCE_HEADER)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub ell1: u32,
    pub ell2: u32,
    pub n: u64,
}

/// Contents of `report.json`. Rates that are undefined serialise as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub estimate: f64,
    pub bias_estimate: Option<f64>,
    pub alpha_hat: [Option<f64>; 2],
    pub beta_hat: [Option<f64>; 2],
    pub gamma: [Option<f64>; 2],
    pub converged: bool,
    pub allocations: Vec<Allocation>,
    pub total_cost: f64,
    pub epsilon: f64,
    pub std_error: f64,
    pub levels_used: u32,
    pub grad_evals: u64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ReportFile {
    pub fn from_report(r: &EstimatorReport, epsilon: f64) -> Self {
        let rates = |sel: fn(&masga_core::Rates) -> [f64; 2]| match &r.rates {
            Some(rt) => sel(rt).map(finite),
            None => [None, None],
        };
        Self {
            estimate: r.estimate,
            bias_estimate: finite(r.bias_estimate),
            alpha_hat: rates(|x| x.alpha),
            beta_hat: rates(|x| x.beta),
            gamma: rates(|x| x.gamma),
            converged: r.converged,
            allocations: r
                .allocations
                .iter()
                .map(|(l, n)| Allocation { ell1: l.ell1, ell2: l.ell2, n: *n })
                .collect(),
            total_cost: r.total_cost,
            epsilon,
            std_error: r.std_error,
            levels_used: r.levels_used,
            grad_evals: r.grad_evals,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    /// Human-readable summary printed by the CLI.
    pub fn summary(&self) -> String {
        let pair = |v: &[Option<f64>; 2]| {
            let f = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.4}"));
            format!("({}, {})", f(v[0]), f(v[1]))
        };
        let mut s = String::new();
        s.push_str(&format!("epsilon        {}\n", self.epsilon));
        s.push_str(&format!("estimate       {:.10e} +/- {:.3e}\n", self.estimate, self.std_error));
        match self.bias_estimate {
            Some(b) => s.push_str(&format!("bias estimate  {b:.3e}\n")),
            None => s.push_str("bias estimate  -\n"),
        }
        s.push_str(&format!(
            "converged      {} (L = {})\n",
            if self.converged { "yes" } else { "no, level cap reached" },
            self.levels_used
        ));
        s.push_str(&format!("alpha_hat      {}\n", pair(&self.alpha_hat)));
        s.push_str(&format!("beta_hat       {}\n", pair(&self.beta_hat)));
        s.push_str(&format!("gamma          {}\n", pair(&self.gamma)));
        s.push_str(&format!("total cost     {:.6e}\n", self.total_cost));
        s.push_str(&format!("grad evals     {}\n", self.grad_evals));
        s.push_str("allocations   ");
        for a in &self.allocations {
            s.push_str(&format!(" ({},{}):{}", a.ell1, a.ell2, a.n));
        }
        s.push('\n');
        s
    }
}
