//! Level samples, baseline estimators and per-level running statistics.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math;
use crate::models::{DriftModel, ReplacementMode};
use crate::rng::{NoiseSource, Role, StreamKey};
use crate::sde::{
    nested_combination, simulate_chain, simulate_masga_cluster, simulate_plain_cluster, ChainCluster,
    ClusterSpec, PlainCluster,
};

/// `(l1, l2)`: subsampling index and discretisation index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    pub ell1: u32,
    pub ell2: u32,
}

impl MultiIndex {
    pub const fn new(ell1: u32, ell2: u32) -> Self {
        Self { ell1, ell2 }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.ell1, self.ell2)
    }
}

/// Base batch size, base step and base step count; level `(l1, l2)` uses a
/// batch of `s0 2^l1`, step `h0 2^-l2` and `n0 2^l2` steps, so the terminal
/// time `n0 h0` is shared by all levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelGeometry {
    pub s0: usize,
    pub h0: f64,
    pub n0: usize,
    pub mode: ReplacementMode,
}

impl LevelGeometry {
    pub fn new(s0: usize, h0: f64, n0: usize) -> Result<Self> {
        if s0 == 0 {
            return Err(Error::Config("base batch size must be positive"));
        }
        if !(h0 > 0.0) || !h0.is_finite() {
            return Err(Error::Config("base step size must be positive"));
        }
        if n0 == 0 {
            return Err(Error::Config("base step count must be positive"));
        }
        Ok(Self { s0, h0, n0, mode: ReplacementMode::Without })
    }

    pub fn with_mode(mut self, mode: ReplacementMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn batch_size(&self, ell1: u32) -> usize {
        self.s0 << ell1
    }

    pub fn step_size(&self, ell2: u32) -> f64 {
        self.h0 / (1u64 << ell2) as f64
    }

    pub fn n_steps(&self, ell2: u32) -> usize {
        self.n0 << ell2
    }

    pub fn terminal_time(&self) -> f64 {
        self.n0 as f64 * self.h0
    }

    /// Fine steps times fine batch size, `t h^-1 s`.
    pub fn cost_per_path(&self, level: MultiIndex) -> f64 {
        (self.n_steps(level.ell2) as f64) * (self.batch_size(level.ell1) as f64)
    }

    /// Coupled-chain layout for a level, with boundary levels degenerating to
    /// the one-index or single-chain systems.
    pub fn cluster_spec(&self, level: MultiIndex) -> ClusterSpec {
        ClusterSpec {
            h: self.step_size(level.ell2),
            s: self.batch_size(level.ell1),
            n_fine_steps: self.n_steps(level.ell2),
            split_subsampling: level.ell1 >= 1,
            split_time: level.ell2 >= 1,
            mode: self.mode,
        }
    }

    /// Reject levels whose fine batch cannot be drawn from `m` points.
    pub fn check_level(&self, level: MultiIndex, m: usize) -> Result<()> {
        let s = self.batch_size(level.ell1);
        if self.mode == ReplacementMode::Without && s > m {
            return Err(Error::LevelCap { level: level.ell1, batch: s, m });
        }
        Ok(())
    }
}

/// Quantity of interest `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TestFunction {
    NormSq,
    Norm,
    Coordinate(usize),
    /// `log |x|`, with `|x|` floored at `1e-300`.
    LogNorm,
    ExpCoordinate(usize),
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::NormSq => math::norm_sq(x),
            TestFunction::Norm => math::sqrt(math::norm_sq(x)),
            TestFunction::Coordinate(i) => x[i],
            TestFunction::LogNorm => math::ln(math::sqrt(math::norm_sq(x)).max(1e-300)),
            TestFunction::ExpCoordinate(i) => math::exp(x[i]),
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match *self {
            TestFunction::Coordinate(i) | TestFunction::ExpCoordinate(i) if i >= d => {
                Err(Error::Dimension { expected: d, found: i + 1 })
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::NormSq => f.write_str("norm_sq"),
            TestFunction::Norm => f.write_str("norm"),
            TestFunction::Coordinate(i) => write!(f, "coordinate({i})"),
            TestFunction::LogNorm => f.write_str("log_norm"),
            TestFunction::ExpCoordinate(i) => write!(f, "exp_coordinate({i})"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// Accepts the display form, plus `identity` for `coordinate(0)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<Result<usize>> {
            let rest = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(rest.trim().parse().map_err(|_| Error::Config("test function index must be an integer")))
        };
        match s {
            "norm_sq" => return Ok(TestFunction::NormSq),
            "norm" => return Ok(TestFunction::Norm),
            "log_norm" => return Ok(TestFunction::LogNorm),
            "identity" => return Ok(TestFunction::Coordinate(0)),
            _ => {}
        }
        if let Some(i) = arg("coordinate") {
            return i.map(TestFunction::Coordinate);
        }
        if let Some(i) = arg("exp_coordinate") {
            return i.map(TestFunction::ExpCoordinate);
        }
        Err(Error::Config("unknown test function"))
    }
}

/// Streaming count, mean and sum of squared deviations for one level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelStats {
    pub level: MultiIndex,
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub cost_per_path: f64,
}

impl LevelStats {
    pub fn new(level: MultiIndex, cost_per_path: f64) -> Self {
        Self { level, n: 0, mean: 0.0, m2: 0.0, cost_per_path }
    }

    /// Welford update.
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combine with statistics of a disjoint sample (Chan et al.).
    pub fn merge(&mut self, other: &LevelStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            let level = self.level;
            *self = *other;
            self.level = level;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn variance(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::TooFewSamples { n: self.n });
        }
        Ok(self.m2 / (self.n - 1) as f64)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> Result<f64> {
        Ok(math::sqrt(self.variance()? / self.n as f64))
    }
}

/// Functional form of the streaming update.
pub fn update_stats(mut stats: LevelStats, sample: f64) -> LevelStats {
    stats.push(sample);
    stats
}

/// Nested antithetic difference of `f` over a terminal cluster. Absent chains
/// (boundary levels) drop out, so level `(0,0)` yields `f(X)`.
pub fn delta_ant_phi(f: &TestFunction, cluster: &ChainCluster) -> f64 {
    nested_combination(|l| cluster.position(l).map(|x| f.eval(x)))
}

/// Four-term non-antithetic difference from values at
/// `(s, h)`, `(s, 2h)`, `(s/2, h)`, `(s/2, 2h)`; missing terms drop out.
pub fn plain_difference(values: [Option<f64>; 4]) -> f64 {
    let [ff, fc, cf, cc] = values;
    let ff = ff.expect("finest chain always present");
    match (fc, cf, cc) {
        (Some(fc), Some(cf), Some(cc)) => (ff - fc) - (cf - cc),
        (Some(fc), None, _) => ff - fc,
        (None, Some(cf), _) => ff - cf,
        _ => ff,
    }
}

pub fn delta_phi_plain(f: &TestFunction, cluster: &PlainCluster) -> f64 {
    let v = |i: usize| cluster.positions[i].as_deref().map(|x| f.eval(x));
    plain_difference([v(0), v(1), v(2), v(3)])
}

/// One antithetic-in-subsampling correction `f(X^f) - (f(X^-) + f(X^+))/2` at
/// fixed step `h`, where the fine batch has size `s0 2^l1`.
#[allow(clippy::too_many_arguments)]
pub fn amlmc_subsampling_sample<M: DriftModel + ?Sized>(
    f: &TestFunction,
    model: &M,
    ell1: u32,
    s0: usize,
    h: f64,
    n_steps: usize,
    mode: ReplacementMode,
    key: &StreamKey,
    x0: &[f64],
) -> Result<f64> {
    let spec = ClusterSpec {
        h,
        s: s0 << ell1,
        n_fine_steps: n_steps,
        split_subsampling: ell1 >= 1,
        split_time: false,
        mode,
    };
    let c = simulate_masga_cluster(model, &spec, &mut key.stream(Role::Gaussian), &mut key.stream(Role::FineBatch), x0)?;
    Ok(delta_ant_phi(f, &c))
}

/// One antithetic-in-time correction at fixed batch size `s`, with step
/// `h0 2^-l2` over `n0 2^l2` fine steps.
#[allow(clippy::too_many_arguments)]
pub fn amlmc_discretisation_sample<M: DriftModel + ?Sized>(
    f: &TestFunction,
    model: &M,
    ell2: u32,
    s: usize,
    h0: f64,
    n0: usize,
    mode: ReplacementMode,
    key: &StreamKey,
    x0: &[f64],
) -> Result<f64> {
    let spec = ClusterSpec {
        h: h0 / (1u64 << ell2) as f64,
        s,
        n_fine_steps: n0 << ell2,
        split_subsampling: false,
        split_time: ell2 >= 1,
        mode,
    };
    let c = simulate_masga_cluster(model, &spec, &mut key.stream(Role::Gaussian), &mut key.stream(Role::FineBatch), x0)?;
    Ok(delta_ant_phi(f, &c))
}

/// Plain Monte Carlo result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Per-datum gradient evaluations.
    pub cost: f64,
    pub n: u64,
}

fn mc_streams(master_seed: u64, path: u64) -> (NoiseSource, NoiseSource) {
    let key = StreamKey::new(master_seed, u32::MAX, u32::MAX, path);
    (key.stream(Role::MonteCarlo), key.stream(Role::FineBatch))
}

/// One terminal value of `f` from the `path`-th independent single chain.
#[allow(clippy::too_many_arguments)]
pub fn mc_sample<M: DriftModel + ?Sized>(
    f: &TestFunction,
    model: &M,
    s: usize,
    h: f64,
    n_steps: usize,
    mode: ReplacementMode,
    x0: &[f64],
    master_seed: u64,
    path: u64,
) -> Result<f64> {
    let (mut g, mut b) = mc_streams(master_seed, path);
    let t = simulate_chain(model, s, h, n_steps, mode, &mut g, &mut b, x0, false)?;
    Ok(f.eval(&t.final_state.position))
}

/// Average of `f` over `n_paths` independent chains; cost `n_paths n_steps s`.
#[allow(clippy::too_many_arguments)]
pub fn standard_mc_estimate<M: DriftModel + ?Sized>(
    f: &TestFunction,
    model: &M,
    s: usize,
    h: f64,
    n_steps: usize,
    mode: ReplacementMode,
    x0: &[f64],
    master_seed: u64,
    n_paths: u64,
) -> Result<McEstimate> {
    f.check_dim(model.dim())?;
    let mut stats = LevelStats::new(MultiIndex::default(), (n_steps * s) as f64);
    for p in 0..n_paths {
        stats.push(mc_sample(f, model, s, h, n_steps, mode, x0, master_seed, p)?);
    }
    Ok(mc_summary(&stats))
}

pub(crate) fn mc_summary(stats: &LevelStats) -> McEstimate {
    McEstimate {
        estimate: stats.mean,
        std_error: stats.std_error().unwrap_or(f64::NAN),
        cost: stats.cost_per_path * stats.n as f64,
        n: stats.n,
    }
}

/// SGLD with a control variate anchored at `x_hat`:
/// `b_cv(x, U) = a(x_hat) + b(x, U) - b(x_hat, U)`.
pub struct ControlVariateModel<'a, M: ?Sized> {
    inner: &'a M,
    x_hat: Vec<f64>,
    a_hat: Vec<f64>,
}

impl<'a, M: DriftModel + ?Sized> ControlVariateModel<'a, M> {
    pub fn new(inner: &'a M, x_hat: &[f64]) -> Result<Self> {
        let d = inner.dim();
        if x_hat.len() != d {
            return Err(Error::Dimension { expected: d, found: x_hat.len() });
        }
        let mut a_hat = vec![0.0; d];
        inner.exact_drift(x_hat, &mut a_hat);
        Ok(Self { inner, x_hat: x_hat.to_vec(), a_hat })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.x_hat
    }
}

impl<M: DriftModel + ?Sized> DriftModel for ControlVariateModel<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn data_len(&self) -> usize {
        self.inner.data_len()
    }

    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn estimated_drift(&self, x: &[f64], batch: &[usize], out: &mut [f64]) {
        let mut at_anchor = vec![0.0; out.len()];
        self.inner.estimated_drift(x, batch, out);
        self.inner.estimated_drift(&self.x_hat, batch, &mut at_anchor);
        for ((o, a), c) in out.iter_mut().zip(&self.a_hat).zip(&at_anchor) {
            *o = a + (*o - c);
        }
    }

    fn exact_drift(&self, x: &[f64], out: &mut [f64]) {
        self.inner.exact_drift(x, out);
    }

    fn log_target(&self, x: &[f64]) -> Option<f64> {
        self.inner.log_target(x)
    }
}

/// Plain Monte Carlo over SGLD-CV chains. Each step evaluates the batch at
/// both the state and the anchor, so the cost is `2 n_paths n_steps s`.
#[allow(clippy::too_many_arguments)]
pub fn sgld_cv_estimate<M: DriftModel + ?Sized>(
    f: &TestFunction,
    model: &M,
    s: usize,
    h: f64,
    n_steps: usize,
    mode: ReplacementMode,
    x_hat: &[f64],
    x0: &[f64],
    master_seed: u64,
    n_paths: u64,
) -> Result<McEstimate> {
    let cv = ControlVariateModel::new(model, x_hat)?;
    let mut out = standard_mc_estimate(f, &cv, s, h, n_steps, mode, x0, master_seed, n_paths)?;
    out.cost *= 2.0;
    Ok(out)
}

/// How the four (or nine) chains of a level are coupled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Coupling {
    #[default]
    Antithetic,
    Plain,
}

/// Draws level samples for the adaptive driver. Path `p` of level `l` is a
/// pure function of `(master_seed, l, p)`.
pub struct LevelSampler<'a, M: ?Sized> {
    pub model: &'a M,
    pub geometry: LevelGeometry,
    pub f: TestFunction,
    pub coupling: Coupling,
    pub master_seed: u64,
    pub x0: Vec<f64>,
}

impl<'a, M: DriftModel + ?Sized> LevelSampler<'a, M> {
    pub fn new(model: &'a M, geometry: LevelGeometry, f: TestFunction, master_seed: u64, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != model.dim() {
            return Err(Error::Dimension { expected: model.dim(), found: x0.len() });
        }
        f.check_dim(model.dim())?;
        Ok(Self { model, geometry, f, coupling: Coupling::Antithetic, master_seed, x0 })
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn check_level(&self, level: MultiIndex) -> Result<()> {
        self.geometry.check_level(level, self.model.data_len())
    }

    pub fn cost_per_path(&self, level: MultiIndex) -> f64 {
        self.geometry.cost_per_path(level)
    }

    pub fn key(&self, level: MultiIndex, path: u64) -> StreamKey {
        StreamKey::new(self.master_seed, level.ell1, level.ell2, path)
    }

    /// Terminal antithetic cluster of one path.
    pub fn cluster(&self, level: MultiIndex, path: u64) -> Result<ChainCluster> {
        let key = self.key(level, path);
        let spec = self.geometry.cluster_spec(level);
        simulate_masga_cluster(
            self.model,
            &spec,
            &mut key.stream(Role::Gaussian),
            &mut key.stream(Role::FineBatch),
            &self.x0,
        )
    }

    /// Terminal plain-coupled chains of one path. The finest chain is
    /// identical to the `ff` chain of the antithetic cluster with the same key.
    pub fn plain_cluster(&self, level: MultiIndex, path: u64) -> Result<PlainCluster> {
        let key = self.key(level, path);
        let spec = self.geometry.cluster_spec(level);
        let mut streams = [
            key.stream(Role::FineBatch),
            key.stream(Role::PlainBatch(1)),
            key.stream(Role::PlainBatch(2)),
            key.stream(Role::PlainBatch(3)),
        ];
        simulate_plain_cluster(self.model, &spec, &mut key.stream(Role::Gaussian), &mut streams, &self.x0)
    }

    /// One level sample together with the gradient evaluations it cost.
    pub fn sample_with_evals(&self, level: MultiIndex, path: u64) -> Result<(f64, u64)> {
        match self.coupling {
            Coupling::Antithetic => {
                let c = self.cluster(level, path)?;
                Ok((delta_ant_phi(&self.f, &c), c.grad_evals()))
            }
            Coupling::Plain => {
                let c = self.plain_cluster(level, path)?;
                Ok((delta_phi_plain(&self.f, &c), c.grad_evals))
            }
        }
    }

    pub fn sample(&self, level: MultiIndex, path: u64) -> Result<f64> {
        self.sample_with_evals(level, path).map(|v| v.0)
    }

    /// `f` at the end of a single chain with the level's finest parameters,
    /// on streams independent of every level sample.
    pub fn direct_sample(&self, level: MultiIndex, path: u64) -> Result<f64> {
        let g = &self.geometry;
        let key = self.key(level, path);
        let t = simulate_chain(
            self.model,
            g.batch_size(level.ell1),
            g.step_size(level.ell2),
            g.n_steps(level.ell2),
            g.mode,
            &mut key.stream(Role::MonteCarlo),
            &mut key.stream(Role::Custom(0)),
            &self.x0,
            false,
        )?;
        Ok(self.f.eval(&t.final_state.position))
    }
}
