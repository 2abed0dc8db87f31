//! Adaptive multi-index driver: path allocation, bias extrapolation, level-set
//! growth and rate fitting.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::estimators::{LevelSampler, LevelStats, MultiIndex};
use crate::math;
use crate::models::DriftModel;

/// Which levels `[L]` contains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LevelShape {
    /// The square `{0..=L} x {0..=L}`.
    #[default]
    Full,
    /// `(l, 0)` only: antithetic in the batch size.
    SubsamplingOnly,
    /// `(0, l)` only: antithetic in the step size.
    DiscretisationOnly,
}

impl LevelShape {
    pub fn levels(self, l: u32) -> Vec<MultiIndex> {
        match self {
            LevelShape::Full => (0..=l).flat_map(|a| (0..=l).map(move |b| MultiIndex::new(a, b))).collect(),
            LevelShape::SubsamplingOnly => (0..=l).map(|a| MultiIndex::new(a, 0)).collect(),
            LevelShape::DiscretisationOnly => (0..=l).map(|b| MultiIndex::new(0, b)).collect(),
        }
    }

    /// Levels of `[L]` that are not in `[L-1]`.
    pub fn boundary(self, l: u32) -> Vec<MultiIndex> {
        self.levels(l).into_iter().filter(|m| m.ell1 == l || m.ell2 == l).collect()
    }

    /// Indices that are refined (0 subsampling, 1 discretisation).
    pub fn active_indices(self) -> &'static [usize] {
        match self {
            LevelShape::Full => &[0, 1],
            LevelShape::SubsamplingOnly => &[0],
            LevelShape::DiscretisationOnly => &[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub epsilon: f64,
    pub n_pilot: u64,
    pub l_init: u32,
    pub l_max: u32,
    /// Weak rate used when a fitted one is not above `0.1`.
    pub alpha_assumed: f64,
    pub shape: LevelShape,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, n_pilot: 100, l_init: 2, l_max: 8, alpha_assumed: 1.0, shape: LevelShape::Full }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config("epsilon must be positive"));
        }
        if self.n_pilot < 2 {
            return Err(Error::Config("n_pilot must be at least 2"));
        }
        if self.l_init < 1 {
            return Err(Error::Config("l_init must be at least 1"));
        }
        if self.l_max < self.l_init {
            return Err(Error::Config("l_max must not be below l_init"));
        }
        if !(self.alpha_assumed > 0.0) {
            return Err(Error::Config("alpha_assumed must be positive"));
        }
        Ok(())
    }
}

/// Per-index exponents: `|E dPhi| ~ 2^-<alpha, l>`, `Var ~ 2^-<beta, l>`,
/// cost `~ 2^<gamma, l>`. Indices not refined by the level shape are NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub estimate: f64,
    /// `sqrt(sum V_l / N_l)`.
    pub std_error: f64,
    pub bias_estimate: f64,
    pub rates: Option<Rates>,
    pub converged: bool,
    pub levels_used: u32,
    pub allocations: Vec<(MultiIndex, u64)>,
    /// `sum N_l C_l` with the nominal per-path cost.
    pub total_cost: f64,
    /// Per-datum gradient evaluations actually performed by all chains.
    pub grad_evals: u64,
    pub stats: Vec<LevelStats>,
}

/// Unrounded optimal path counts
/// `eps^-2 sqrt(V_l / C_l) sum_k sqrt(V_k C_k)`.
pub fn optimal_paths_raw(stats: &[LevelStats], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive"));
    }
    let mut vc = Vec::with_capacity(stats.len());
    for s in stats {
        let v = s.variance()?;
        if v.is_nan() || v < 0.0 {
            return Err(Error::Allocation("level variance is NaN or negative"));
        }
        if !(s.cost_per_path > 0.0) {
            return Err(Error::Allocation("level cost must be positive"));
        }
        vc.push((v, s.cost_per_path));
    }
    let total: f64 = vc.iter().map(|(v, c)| math::sqrt(v * c)).sum();
    let scale = total / (epsilon * epsilon);
    Ok(vc.iter().map(|(v, c)| math::sqrt(v / c) * scale).collect())
}

/// Rounded up and floored at `n_pilot`.
pub fn optimal_paths(stats: &[LevelStats], epsilon: f64, n_pilot: u64) -> Result<Vec<u64>> {
    let raw = optimal_paths_raw(stats, epsilon)?;
    raw.into_iter()
        .map(|n| {
            if !n.is_finite() || n > 1e15 {
                return Err(Error::Allocation("path count overflows"));
            }
            Ok((math::ceil(n) as u64).max(n_pilot))
        })
        .collect()
}

fn effective_alpha(alpha: f64, assumed: f64) -> f64 {
    if alpha.is_finite() && alpha > 0.1 {
        alpha
    } else {
        assumed
    }
}

/// Geometric tail extrapolation: the largest `|mean_l| / (2^alpha - 1)` over
/// levels on the outer boundary of `[L]`, `alpha` taken for the index that is
/// at `L` (the smaller one when both are).
pub fn estimate_bias(stats: &[LevelStats], l: u32, alpha_hat: [f64; 2], alpha_assumed: f64) -> f64 {
    let a = [effective_alpha(alpha_hat[0], alpha_assumed), effective_alpha(alpha_hat[1], alpha_assumed)];
    stats
        .iter()
        .filter(|s| s.level.ell1 == l || s.level.ell2 == l)
        .filter(|s| s.level != MultiIndex::new(0, 0))
        .map(|s| {
            let alpha = match (s.level.ell1 == l, s.level.ell2 == l) {
                (true, true) => a[0].min(a[1]),
                (true, false) => a[0],
                _ => a[1],
            };
            s.mean.abs() / (math::exp(alpha * core::f64::consts::LN_2) - 1.0)
        })
        .fold(0.0, f64::max)
}

/// Ordinary least squares of `y` on the columns of `x` plus an intercept.
/// Returns the slope coefficients.
fn least_squares(rows: &[([f64; 2], f64)], cols: &[usize]) -> Result<Vec<f64>> {
    let p = cols.len() + 1;
    if rows.len() < p {
        return Err(Error::Fit("not enough levels for the fit"));
    }
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (x, y) in rows {
        let mut v = [1.0, 0.0, 0.0];
        for (k, &c) in cols.iter().enumerate() {
            v[k + 1] = x[c];
        }
        for i in 0..p {
            xty[i] += v[i] * y;
            for j in 0..p {
                xtx[i][j] += v[i] * v[j];
            }
        }
    }
    for &c in cols {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.0[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r.0[c] - mean) * (r.0[c] - mean)).sum::<f64>();
        if var <= 0.0 {
            return Err(Error::Fit("regressor has zero variance"));
        }
    }
    // Gaussian elimination with partial pivoting on the normal equations.
    let mut a = xtx;
    let mut b = xty;
    for k in 0..p {
        let piv = (k..p).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap_or(k);
        if a[piv][k].abs() < 1e-12 {
            return Err(Error::Fit("singular design"));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..p {
            let r = a[i][k] / a[k][k];
            for j in k..p {
                a[i][j] -= r * a[k][j];
            }
            b[i] -= r * b[k];
        }
    }
    let mut sol = [0.0f64; 3];
    for k in (0..p).rev() {
        let mut acc = b[k];
        for j in k + 1..p {
            acc -= a[k][j] * sol[j];
        }
        sol[k] = acc / a[k][k];
    }
    Ok(sol[1..p].to_vec())
}

/// Relative size below which a level mean is treated as rounding noise and
/// left out of the rate fit. Variances use the square of this.
const ROUNDOFF_FLOOR: f64 = 1e-10;

/// Slopes of `rows` against the active indices. Falls back to one index at a
/// time when the joint design is degenerate; an index that cannot be fitted
/// stays NaN.
fn fit_slopes(rows: &[([f64; 2], f64)], idx: &[usize]) -> Result<[f64; 2]> {
    let mut out = [f64::NAN; 2];
    match least_squares(rows, idx) {
        Ok(sol) => idx.iter().zip(sol).for_each(|(&c, v)| out[c] = -v),
        Err(joint) => {
            for &c in idx {
                if let Ok(sol) = least_squares(rows, &[c]) {
                    out[c] = -sol[0];
                }
            }
            if out.iter().all(|v| v.is_nan()) {
                return Err(joint);
            }
        }
    }
    Ok(out)
}

/// Log-linear fit of `|mean|` and variance against the level.
///
/// Level `(0,0)` is excluded, as are levels whose mean or variance sits at
/// rounding level relative to the largest one. When the shape is the full
/// square and at least two resolved interior levels exist along each index
/// (`l1, l2 >= 1`), only interior levels are used, since boundary levels carry
/// a different constant. Gamma comes from the cost model and is exactly `(1, 1)`.
pub fn fit_rates(stats: &[LevelStats], shape: LevelShape) -> Result<Rates> {
    let idx = shape.active_indices();
    let candidates: Vec<&LevelStats> = stats.iter().filter(|s| s.level != MultiIndex::new(0, 0)).collect();
    let point = |s: &LevelStats| [s.level.ell1 as f64, s.level.ell2 as f64];
    let mean_scale = stats.iter().map(|s| s.mean.abs()).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let var_scale = stats
        .iter()
        .filter_map(|s| s.variance().ok())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mean_rows = |v: &[&LevelStats]| -> Vec<([f64; 2], f64)> {
        v.iter()
            .filter(|s| s.mean.is_finite() && s.mean.abs() > ROUNDOFF_FLOOR * mean_scale)
            .map(|s| (point(s), math::log2(s.mean.abs())))
            .collect()
    };
    let var_rows = |v: &[&LevelStats]| -> Vec<([f64; 2], f64)> {
        v.iter()
            .filter_map(|s| {
                s.variance()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0 && *v > ROUNDOFF_FLOOR * ROUNDOFF_FLOOR * var_scale)
                    .map(|v| (point(s), math::log2(v)))
            })
            .collect()
    };
    let spans_both = |rows: &[([f64; 2], f64)]| {
        (0..2).all(|c| {
            let mut xs: Vec<u64> = rows.iter().map(|r| r.0[c] as u64).collect();
            xs.sort_unstable();
            xs.dedup();
            xs.len() >= 2
        })
    };
    let interior: Vec<&LevelStats> = candidates.iter().copied().filter(|s| s.level.ell1 >= 1 && s.level.ell2 >= 1).collect();
    let pick = |rows_of: &dyn Fn(&[&LevelStats]) -> Vec<([f64; 2], f64)>| {
        let inner = rows_of(&interior);
        if shape == LevelShape::Full && spans_both(&inner) {
            inner
        } else {
            rows_of(&candidates)
        }
    };

    let alpha = fit_slopes(&pick(&mean_rows), idx)?;
    let beta = fit_slopes(&pick(&var_rows), idx)?;
    let mut rates = Rates { alpha, beta, gamma: [f64::NAN; 2] };
    for &c in idx {
        rates.gamma[c] = 1.0;
    }
    Ok(rates)
}

/// `max_k (gamma_k - beta_k) / alpha_k < 0`, over the indices that are defined.
pub fn check_complexity_condition(alpha: &[f64], beta: &[f64], gamma: &[f64]) -> bool {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..alpha.len().min(beta.len()).min(gamma.len()) {
        if alpha[k].is_nan() && beta[k].is_nan() {
            continue;
        }
        worst = worst.max((gamma[k] - beta[k]) / alpha[k]);
    }
    worst < 0.0
}

/// Evaluates a batch of paths for one level; results come back in path order.
pub trait PathExecutor {
    fn run<F>(&self, paths: Range<u64>, sample: F) -> Result<Vec<(f64, u64)>>
    where
        F: Fn(u64) -> Result<(f64, u64)> + Sync + Send;
}

/// Runs paths one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl PathExecutor for Serial {
    fn run<F>(&self, paths: Range<u64>, sample: F) -> Result<Vec<(f64, u64)>>
    where
        F: Fn(u64) -> Result<(f64, u64)> + Sync + Send,
    {
        paths.map(sample).collect()
    }
}

struct Driver<'s, 'a, M: ?Sized, E> {
    sampler: &'s LevelSampler<'a, M>,
    exec: &'s E,
    stats: BTreeMap<MultiIndex, LevelStats>,
    grad_evals: u64,
}

impl<M: DriftModel + ?Sized, E: PathExecutor> Driver<'_, '_, M, E> {
    /// Extend a level to `target` paths; existing samples are kept.
    fn top_up(&mut self, level: MultiIndex, target: u64) -> Result<()> {
        let cost = self.sampler.cost_per_path(level);
        let entry = self.stats.entry(level).or_insert_with(|| LevelStats::new(level, cost));
        if target <= entry.n {
            return Ok(());
        }
        let sampler = self.sampler;
        let out = self.exec.run(entry.n..target, |p| sampler.sample_with_evals(level, p))?;
        for (v, evals) in out {
            entry.push(v);
            self.grad_evals += evals;
        }
        Ok(())
    }
}

/// Adaptive antithetic multi-index estimator.
///
/// Pilot-samples `[L_init]`, then repeatedly allocates paths, tops levels up,
/// and stops once the extrapolated bias is below `eps/2`; otherwise `L` grows
/// by one and the new boundary is pilot-sampled. Growth stops at `l_max` or
/// at the largest level the dataset can support, with `converged = false`.
pub fn run_masga<M: DriftModel + ?Sized, E: PathExecutor>(
    sampler: &LevelSampler<'_, M>,
    config: &AdaptiveConfig,
    exec: &E,
) -> Result<EstimatorReport> {
    config.validate()?;
    let shape = config.shape;
    let finest = |l: u32| match shape {
        LevelShape::DiscretisationOnly => MultiIndex::new(0, l),
        _ => MultiIndex::new(l, l),
    };
    sampler.check_level(finest(config.l_init))?;
    let mut l_cap = config.l_max;
    while l_cap > config.l_init && sampler.check_level(finest(l_cap)).is_err() {
        l_cap -= 1;
    }

    let mut d = Driver { sampler, exec, stats: BTreeMap::new(), grad_evals: 0 };
    let mut l = config.l_init;
    for level in shape.levels(l) {
        d.top_up(level, config.n_pilot)?;
    }

    loop {
        let levels = shape.levels(l);
        let current: Vec<LevelStats> = levels.iter().map(|lv| d.stats[lv]).collect();
        let n = optimal_paths(&current, config.epsilon, config.n_pilot)?;
        for (lv, target) in levels.iter().zip(&n) {
            d.top_up(*lv, *target)?;
        }
        let current: Vec<LevelStats> = levels.iter().map(|lv| d.stats[lv]).collect();
        let rates = fit_rates(&current, shape).ok();
        let alpha_hat = rates.map(|r| r.alpha).unwrap_or([f64::NAN; 2]);
        let bias = estimate_bias(&current, l, alpha_hat, config.alpha_assumed);
        let converged = bias < config.epsilon / 2.0;
        if converged || l >= l_cap {
            let estimate = current.iter().map(|s| s.mean).sum();
            let var: f64 = current.iter().map(|s| s.variance().unwrap_or(0.0) / s.n as f64).sum();
            return Ok(EstimatorReport {
                estimate,
                std_error: math::sqrt(var),
                bias_estimate: bias,
                rates,
                converged,
                levels_used: l,
                allocations: current.iter().map(|s| (s.level, s.n)).collect(),
                total_cost: current.iter().map(|s| s.n as f64 * s.cost_per_path).sum(),
                grad_evals: d.grad_evals,
                stats: current,
            });
        }
        l += 1;
        for level in shape.boundary(l) {
            d.top_up(level, config.n_pilot)?;
        }
    }
}
