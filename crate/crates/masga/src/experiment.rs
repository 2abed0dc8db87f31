//! Configured runs and their result files.

use std::fs;
use std::path::Path;

use masga_core::adaptive::{run_masga, AdaptiveConfig, EstimatorReport, LevelShape, PathExecutor};
use masga_core::estimators::{mc_sample, ControlVariateModel, LevelGeometry, LevelSampler, LevelStats, MultiIndex};
use masga_core::models::find_mode;
use masga_core::{Coupling, DriftModel};

use crate::config::{EstimatorKind, ExperimentConfig, StartPoint};
use crate::error::{Error, Result};
use crate::exec::{with_threads, Parallel};
use crate::model::{build_model, load_data, AnyModel};
use crate::output::{write_convergence, write_levels, ConvergenceRow, LevelRow, ReportFile};

/// Reports for every requested tolerance, in config order.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub runs: Vec<(f64, EstimatorReport)>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.runs.iter().all(|(_, r)| r.converged)
    }

    /// 0 when every run converged, 2 when some run stopped at the level cap.
    pub fn exit_code(&self) -> i32 {
        if self.converged() {
            0
        } else {
            2
        }
    }

    pub fn convergence_rows(&self) -> Vec<ConvergenceRow> {
        self.runs
            .iter()
            .map(|(eps, r)| ConvergenceRow {
                eps: *eps,
                estimate: r.estimate,
                total_cost: r.total_cost,
                cost_times_eps2: r.total_cost * eps * eps,
                levels: r.levels_used,
            })
            .collect()
    }

    pub fn last(&self) -> &(f64, EstimatorReport) {
        self.runs.last().expect("at least one tolerance")
    }
}

pub fn start_point<M: DriftModel + ?Sized>(cfg: &ExperimentConfig, model: &M) -> Result<Vec<f64>> {
    let d = model.dim();
    Ok(match &cfg.x0 {
        StartPoint::Origin => vec![0.0; d],
        StartPoint::Mode { iterations, step } => find_mode(model, &vec![0.0; d], *iterations, *step),
        StartPoint::Explicit(v) if v.len() == d => v.clone(),
        StartPoint::Explicit(v) => {
            return Err(Error::Core(masga_core::Error::Dimension { expected: d, found: v.len() }))
        }
    })
}

pub fn geometry(cfg: &ExperimentConfig) -> Result<LevelGeometry> {
    Ok(LevelGeometry::new(cfg.s0, cfg.h0, cfg.n0)?.with_mode(cfg.replacement))
}

pub fn adaptive_config(cfg: &ExperimentConfig, epsilon: f64, shape: LevelShape) -> AdaptiveConfig {
    AdaptiveConfig {
        epsilon,
        n_pilot: cfg.n_pilot,
        l_init: cfg.l_init,
        l_max: cfg.l_max,
        alpha_assumed: cfg.alpha_assumed,
        shape,
    }
}

/// Plain Monte Carlo at one fixed level, with `N = max(n_pilot, 2 V / eps^2)`
/// so the sampling variance uses half of the squared tolerance.
#[allow(clippy::too_many_arguments)]
pub fn run_single_level<M: DriftModel + ?Sized, E: PathExecutor>(
    model: &M,
    cfg: &ExperimentConfig,
    x0: &[f64],
    epsilon: f64,
    level: u32,
    cost_factor: f64,
    exec: &E,
) -> Result<EstimatorReport> {
    let g = geometry(cfg)?;
    let (s, h, n) = (g.batch_size(level), g.step_size(level), g.n_steps(level));
    let lv = MultiIndex::new(level, level);
    g.check_level(lv, model.data_len())?;
    let per_path = (n * s) as f64 * cost_factor;
    let evals = per_path as u64;
    let mut stats = LevelStats::new(lv, per_path);
    let seed = cfg.master_seed;
    let f = cfg.f;
    let top_up = |stats: &mut LevelStats, target: u64| -> Result<()> {
        let out = exec.run(stats.n..target, |p| {
            mc_sample(&f, model, s, h, n, g.mode, x0, seed, p).map(|v| (v, evals))
        })?;
        out.into_iter().for_each(|(v, _)| stats.push(v));
        Ok(())
    };
    top_up(&mut stats, cfg.n_pilot)?;
    let target = (2.0 * stats.variance()? / (epsilon * epsilon)).ceil();
    if !target.is_finite() || target > 1e12 {
        return Err(Error::Invalid("plain Monte Carlo path count overflows".into()));
    }
    top_up(&mut stats, (target as u64).max(cfg.n_pilot))?;
    Ok(EstimatorReport {
        estimate: stats.mean,
        std_error: stats.std_error()?,
        bias_estimate: f64::NAN,
        rates: None,
        converged: true,
        levels_used: level,
        allocations: vec![(lv, stats.n)],
        total_cost: stats.n as f64 * per_path,
        grad_evals: stats.n * evals,
        stats: vec![stats],
    })
}

fn run_one<E: PathExecutor>(
    model: &AnyModel,
    cfg: &ExperimentConfig,
    x0: &[f64],
    epsilon: f64,
    exec: &E,
) -> Result<EstimatorReport> {
    let adaptive = |shape, coupling| -> Result<EstimatorReport> {
        let sampler = LevelSampler::new(model, geometry(cfg)?, cfg.f, cfg.master_seed, x0.to_vec())?
            .with_coupling(coupling);
        Ok(run_masga(&sampler, &adaptive_config(cfg, epsilon, shape), exec)?)
    };
    match cfg.estimator {
        EstimatorKind::Masga => adaptive(LevelShape::Full, Coupling::Antithetic),
        EstimatorKind::MimcPlain => adaptive(LevelShape::Full, Coupling::Plain),
        EstimatorKind::AmlmcSub => adaptive(LevelShape::SubsamplingOnly, Coupling::Antithetic),
        EstimatorKind::AmlmcDisc => adaptive(LevelShape::DiscretisationOnly, Coupling::Antithetic),
        EstimatorKind::Mc => run_single_level(model, cfg, x0, epsilon, cfg.mc_level, 1.0, exec),
        EstimatorKind::SgldCv => {
            let cv = ControlVariateModel::new(model, x0)?;
            run_single_level(&cv, cfg, x0, epsilon, cfg.mc_level, 2.0, exec)
        }
    }
}

/// Run every tolerance of `cfg` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = build_model(cfg, load_data(cfg)?)?;
    cfg.f.check_dim(model.dim())?;
    let x0 = start_point(cfg, &model)?;
    with_threads(cfg.threads, || {
        let runs = cfg
            .epsilons
            .iter()
            .map(|&eps| run_one(&model, cfg, &x0, eps, &Parallel).map(|r| (eps, r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunOutcome { runs })
    })
}

/// Run and write `levels.csv` and `report.json` for the last tolerance, and
/// `convergence.csv` for all of them.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let outcome = execute(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (eps, last) = outcome.last();
    let rows: Vec<LevelRow> = last.stats.iter().map(LevelRow::from).collect();
    write_levels(&out_dir.join("levels.csv"), &rows)?;
    write_convergence(&out_dir.join("convergence.csv"), &outcome.convergence_rows())?;
    ReportFile::from_report(last, *eps).write(&out_dir.join("report.json"))?;
    Ok(outcome)
}

/// Least-squares slope of `log cost` against `log(1/eps)`.
pub fn cost_slope(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((1.0 / r.eps).ln(), r.total_cost.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Max over min of `cost * eps^2`.
pub fn flatness_ratio(rows: &[ConvergenceRow]) -> f64 {
    let v: Vec<f64> = rows.iter().map(|r| r.cost_times_eps2).collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

