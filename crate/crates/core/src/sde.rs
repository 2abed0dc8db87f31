//! Single SGLD chains and the coupled chain systems behind the antithetic
//! differences.
//!
//! Chains are labelled `(subsampling, discretisation)`: `f` is fine, `c-`/`c+`
//! are the two antithetic coarse copies. In the subsampling index the coarse
//! copies use the first/second half of the fine batch; in the time index they
//! take one step of `2h` per fine block, driven by the summed Brownian
//! increment and by the fine batch of the block's first/second step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::models::{BatchSampler, DriftModel, ReplacementMode};
use crate::rng::NoiseSource;

/// A chain is declared divergent once its Euclidean norm exceeds this.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub step_index: u64,
}

impl ChainState {
    pub fn new(position: Vec<f64>) -> Self {
        Self { position, step_index: 0 }
    }
}

#[inline]
fn diverged(x: &[f64]) -> bool {
    let n = math::norm_sq(x);
    !n.is_finite() || n > DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD
}

/// One Euler step `x + h b + beta sqrt(h) z`.
pub fn sgld_step(state: &ChainState, drift_value: &[f64], h: f64, beta: f64, z: &[f64]) -> Result<ChainState> {
    let d = state.position.len();
    for v in [drift_value, z] {
        if v.len() != d {
            return Err(Error::Dimension { expected: d, found: v.len() });
        }
    }
    if !(h > 0.0) {
        return Err(Error::Config("step size must be positive"));
    }
    let step = state.step_index + 1;
    if drift_value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step, chain: None });
    }
    let sh = beta * math::sqrt(h);
    let position: Vec<f64> = state
        .position
        .iter()
        .zip(drift_value)
        .zip(z)
        .map(|((x, b), z)| x + h * b + sh * z)
        .collect();
    if diverged(&position) {
        return Err(Error::Divergence { step, chain: None });
    }
    Ok(ChainState { position, step_index: step })
}

/// `(z1 + z2) / sqrt(2)`: the standard normal driving a coarse step of `2h`.
pub fn coarse_increment(z1: &[f64], z2: &[f64]) -> Result<Vec<f64>> {
    if z1.len() != z2.len() {
        return Err(Error::Dimension { expected: z1.len(), found: z2.len() });
    }
    Ok(z1.iter().zip(z2).map(|(a, b)| (a + b) * core::f64::consts::FRAC_1_SQRT_2).collect())
}

/// Terminal state of a single chain, with the visited positions when requested.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub final_state: ChainState,
    pub path: Option<Vec<Vec<f64>>>,
    pub grad_evals: u64,
}

/// Run `n_steps` of SGLD with a fresh batch of size `s` per step.
#[allow(clippy::too_many_arguments)]
pub fn simulate_chain<M: DriftModel + ?Sized>(
    model: &M,
    s: usize,
    h: f64,
    n_steps: usize,
    mode: ReplacementMode,
    gaussian: &mut NoiseSource,
    batches: &mut NoiseSource,
    x0: &[f64],
    record: bool,
) -> Result<Trajectory> {
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Dimension { expected: d, found: x0.len() });
    }
    if !(h > 0.0) {
        return Err(Error::Config("step size must be positive"));
    }
    let mut sampler = BatchSampler::new(model.data_len(), mode);
    sampler.check(s)?;
    let noise_scale = model.beta() * math::sqrt(h);
    let mut x = x0.to_vec();
    let mut z = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut idx = Vec::with_capacity(s);
    let mut path = record.then(|| {
        let mut p = Vec::with_capacity(n_steps + 1);
        p.push(x.clone());
        p
    });
    for k in 0..n_steps {
        gaussian.fill_gaussian(&mut z);
        sampler.draw_into(batches, s, &mut idx);
        model.estimated_drift(&x, &idx, &mut b);
        for i in 0..d {
            x[i] += h * b[i] + noise_scale * z[i];
        }
        if diverged(&x) {
            return Err(Error::Divergence { step: k as u64 + 1, chain: None });
        }
        if let Some(p) = path.as_mut() {
            p.push(x.clone());
        }
    }
    Ok(Trajectory {
        final_state: ChainState { position: x, step_index: n_steps as u64 },
        path,
        grad_evals: (n_steps * s) as u64,
    })
}

/// The nine chains of a nested antithetic difference, `X^{subsampling, time}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChainLabel {
    FF,
    FCm,
    FCp,
    CmF,
    CmCm,
    CmCp,
    CpF,
    CpCm,
    CpCp,
}

impl ChainLabel {
    pub const ALL: [ChainLabel; 9] = [
        ChainLabel::FF,
        ChainLabel::FCm,
        ChainLabel::FCp,
        ChainLabel::CmF,
        ChainLabel::CmCm,
        ChainLabel::CmCp,
        ChainLabel::CpF,
        ChainLabel::CpCm,
        ChainLabel::CpCp,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Which part of the fine batch the chain reads: 0 full, 1 first half, 2 second half.
    #[inline]
    fn batch_part(self) -> usize {
        match self {
            ChainLabel::FF | ChainLabel::FCm | ChainLabel::FCp => 0,
            ChainLabel::CmF | ChainLabel::CmCm | ChainLabel::CmCp => 1,
            ChainLabel::CpF | ChainLabel::CpCm | ChainLabel::CpCp => 2,
        }
    }

    /// For time-coarse chains, which fine step of the block supplies the batch.
    #[inline]
    fn time_part(self) -> Option<usize> {
        match self {
            ChainLabel::FF | ChainLabel::CmF | ChainLabel::CpF => None,
            ChainLabel::FCm | ChainLabel::CmCm | ChainLabel::CpCm => Some(0),
            ChainLabel::FCp | ChainLabel::CmCp | ChainLabel::CpCp => Some(1),
        }
    }
}

/// Geometry of one coupled simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterSpec {
    /// Fine step size.
    pub h: f64,
    /// Fine batch size (the subsampling-coarse copies use halves of it).
    pub s: usize,
    /// Number of fine steps; must be even when `split_time` is set.
    pub n_fine_steps: usize,
    /// Simulate the subsampling-antithetic copies.
    pub split_subsampling: bool,
    /// Simulate the time-antithetic copies.
    pub split_time: bool,
    pub mode: ReplacementMode,
}

impl ClusterSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config("step size must be positive"));
        }
        if self.split_time && self.n_fine_steps % 2 != 0 {
            return Err(Error::Config("time-antithetic clusters need an even number of fine steps"));
        }
        if self.split_subsampling && self.s % 2 != 0 {
            return Err(Error::OddBatch(self.s));
        }
        if self.s == 0 || (self.mode == ReplacementMode::Without && self.s > m) {
            return Err(Error::Range { s: self.s, m });
        }
        Ok(())
    }

    /// Chains that this spec simulates.
    pub fn active(&self) -> [bool; 9] {
        let mut a = [false; 9];
        for l in ChainLabel::ALL {
            let sub_ok = self.split_subsampling || l.batch_part() == 0;
            let time_ok = self.split_time || l.time_part().is_none();
            a[l.index()] = sub_ok && time_ok;
        }
        a
    }
}

/// Terminal (or intermediate) state of the coupled chains.
#[derive(Clone, Debug)]
pub struct ChainCluster {
    d: usize,
    positions: Vec<f64>,
    active: [bool; 9],
    fine_steps: u64,
    grad_evals: u64,
}

impl ChainCluster {
    fn new(x0: &[f64], active: [bool; 9]) -> Self {
        let d = x0.len();
        let mut positions = Vec::with_capacity(9 * d);
        for _ in 0..9 {
            positions.extend_from_slice(x0);
        }
        Self { d, positions, active, fine_steps: 0, grad_evals: 0 }
    }

    /// Build a cluster from explicit positions; `None` marks an absent chain.
    /// The fine-fine chain must be present and all positions share one length.
    pub fn from_positions(positions: [Option<&[f64]>; 9]) -> Result<Self> {
        let d = positions[0].ok_or(Error::Config("the fine-fine chain must be present"))?.len();
        let mut flat = Vec::with_capacity(9 * d);
        let mut active = [false; 9];
        for (i, p) in positions.iter().enumerate() {
            match p {
                Some(x) if x.len() != d => return Err(Error::Dimension { expected: d, found: x.len() }),
                Some(x) => {
                    flat.extend_from_slice(x);
                    active[i] = true;
                }
                None => flat.extend(core::iter::repeat(0.0).take(d)),
            }
        }
        Ok(Self { d, positions: flat, active, fine_steps: 0, grad_evals: 0 })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_active(&self, label: ChainLabel) -> bool {
        self.active[label.index()]
    }

    pub fn position(&self, label: ChainLabel) -> Option<&[f64]> {
        let i = label.index();
        self.active[i].then(|| &self.positions[i * self.d..(i + 1) * self.d])
    }

    /// Fine steps taken so far.
    pub fn fine_steps(&self) -> u64 {
        self.fine_steps
    }

    /// Per-datum gradient evaluations performed across all chains.
    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    /// `Psi`: the nested antithetic combination of positions, coordinate-wise.
    pub fn psi(&self) -> Vec<f64> {
        (0..self.d).map(|i| nested_combination(|l| self.position(l).map(|x| x[i]))).collect()
    }
}

/// Nested antithetic combination of per-chain values; chains that are absent
/// (boundary levels) drop out of the formula.
pub(crate) fn nested_combination<F: Fn(ChainLabel) -> Option<f64>>(value: F) -> f64 {
    use ChainLabel::*;
    let v = |l| value(l);
    let time_diff = |fine: ChainLabel, cm: ChainLabel, cp: ChainLabel| -> f64 {
        let f = v(fine).expect("fine-in-time chain always present");
        match (v(cm), v(cp)) {
            (Some(a), Some(b)) => f - 0.5 * (a + b),
            _ => f,
        }
    };
    let fine = time_diff(FF, FCm, FCp);
    if v(CmF).is_none() {
        return fine;
    }
    fine - 0.5 * (time_diff(CmF, CmCm, CmCp) + time_diff(CpF, CpCm, CpCp))
}

/// Hook into the block loop; used for instrumented replays in tests.
pub trait ClusterObserver {
    /// Called once per block with the raw normals, the increments every chain
    /// consumed, and the cluster state after the block.
    fn on_block(&mut self, _noise: &BlockNoise<'_>, _cluster: &ChainCluster) {}
}

impl ClusterObserver for () {}

/// Noise consumed during one block (one fine step, or two when time-split).
#[derive(Debug)]
pub struct BlockNoise<'a> {
    pub z: [&'a [f64]; 2],
    pub fine_increment: [&'a [f64]; 2],
    pub coarse_increment: Option<&'a [f64]>,
    pub sqrt_h: f64,
    pub beta: f64,
    pub batches: [&'a [usize]; 2],
}

/// Simulate the coupled chains of `spec` from a common start `x0`.
pub fn simulate_masga_cluster<M: DriftModel + ?Sized>(
    model: &M,
    spec: &ClusterSpec,
    gaussian: &mut NoiseSource,
    batches: &mut NoiseSource,
    x0: &[f64],
) -> Result<ChainCluster> {
    simulate_masga_cluster_observed(model, spec, gaussian, batches, x0, &mut ())
}

pub fn simulate_masga_cluster_observed<M: DriftModel + ?Sized, O: ClusterObserver + ?Sized>(
    model: &M,
    spec: &ClusterSpec,
    gaussian: &mut NoiseSource,
    batches: &mut NoiseSource,
    x0: &[f64],
    observer: &mut O,
) -> Result<ChainCluster> {
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Dimension { expected: d, found: x0.len() });
    }
    spec.validate(model.data_len())?;
    let active = spec.active();
    let mut cluster = ChainCluster::new(x0, active);

    let h = spec.h;
    let s = spec.s;
    let half = s / 2;
    let beta = model.beta();
    let sqrt_h = math::sqrt(h);
    let mut sampler = BatchSampler::new(model.data_len(), spec.mode);
    let mut u = [Vec::with_capacity(s), Vec::with_capacity(s)];
    let mut z = [vec![0.0; d], vec![0.0; d]];
    let mut inc = [vec![0.0; d], vec![0.0; d]];
    let mut coarse = vec![0.0; d];
    let mut b = vec![0.0; d];

    let parts = |u: &Vec<usize>, part: usize| -> core::ops::Range<usize> {
        let _ = u;
        match part {
            0 => 0..s,
            1 => 0..half,
            _ => half..s,
        }
    };

    let block_len = if spec.split_time { 2 } else { 1 };
    let n_blocks = spec.n_fine_steps / block_len;
    let fine_time = [ChainLabel::FF, ChainLabel::CmF, ChainLabel::CpF];
    let coarse_time = [
        ChainLabel::FCm,
        ChainLabel::FCp,
        ChainLabel::CmCm,
        ChainLabel::CmCp,
        ChainLabel::CpCm,
        ChainLabel::CpCp,
    ];

    for _ in 0..n_blocks {
        for j in 0..block_len {
            gaussian.fill_gaussian(&mut z[j]);
            sampler.draw_into(batches, s, &mut u[j]);
            for i in 0..d {
                inc[j][i] = beta * (sqrt_h * z[j][i]);
            }
        }

        if spec.split_time {
            for i in 0..d {
                coarse[i] = beta * (sqrt_h * z[0][i] + sqrt_h * z[1][i]);
            }
            for label in coarse_time {
                let li = label.index();
                if !active[li] {
                    continue;
                }
                let t = label.time_part().expect("coarse-in-time label");
                let range = parts(&u[t], label.batch_part());
                let x = &mut cluster.positions[li * d..(li + 1) * d];
                model.estimated_drift(x, &u[t][range.clone()], &mut b);
                cluster.grad_evals += range.len() as u64;
                for i in 0..d {
                    x[i] += 2.0 * h * b[i] + coarse[i];
                }
                if diverged(x) {
                    return Err(Error::Divergence { step: cluster.fine_steps + 2, chain: Some(label) });
                }
            }
        }

        for j in 0..block_len {
            for label in fine_time {
                let li = label.index();
                if !active[li] {
                    continue;
                }
                let range = parts(&u[j], label.batch_part());
                let x = &mut cluster.positions[li * d..(li + 1) * d];
                model.estimated_drift(x, &u[j][range.clone()], &mut b);
                cluster.grad_evals += range.len() as u64;
                for i in 0..d {
                    x[i] += h * b[i] + inc[j][i];
                }
                if diverged(x) {
                    return Err(Error::Divergence { step: cluster.fine_steps + 1 + j as u64, chain: Some(label) });
                }
            }
        }
        cluster.fine_steps += block_len as u64;

        let noise = BlockNoise {
            z: [&z[0], &z[block_len - 1]],
            fine_increment: [&inc[0], &inc[block_len - 1]],
            coarse_increment: spec.split_time.then_some(&coarse[..]),
            sqrt_h,
            beta,
            batches: [&u[0], &u[block_len - 1]],
        };
        observer.on_block(&noise, &cluster);
    }
    Ok(cluster)
}

/// Chains of the plain (non-antithetic) four-term difference. All share the
/// Brownian increments; each draws its own batches, except the fine chain,
/// which reads the same fine-batch stream as the antithetic cluster.
#[derive(Clone, Debug)]
pub struct PlainCluster {
    /// `X^{s, h}`, `X^{s, 2h}`, `X^{s/2, h}`, `X^{s/2, 2h}`.
    pub positions: [Option<Vec<f64>>; 4],
    pub grad_evals: u64,
}

pub fn simulate_plain_cluster<M: DriftModel + ?Sized>(
    model: &M,
    spec: &ClusterSpec,
    gaussian: &mut NoiseSource,
    batch_streams: &mut [NoiseSource; 4],
    x0: &[f64],
) -> Result<PlainCluster> {
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Dimension { expected: d, found: x0.len() });
    }
    spec.validate(model.data_len())?;
    let h = spec.h;
    let beta = model.beta();
    let sqrt_h = math::sqrt(h);
    // (batch size, time-coarse) per slot
    let slots: [(usize, bool, bool); 4] = [
        (spec.s, false, true),
        (spec.s, true, spec.split_time),
        (spec.s / 2, false, spec.split_subsampling),
        (spec.s / 2, true, spec.split_subsampling && spec.split_time),
    ];
    let mut samplers: Vec<BatchSampler> =
        (0..4).map(|_| BatchSampler::new(model.data_len(), spec.mode)).collect();
    let mut pos: Vec<Vec<f64>> = (0..4).map(|_| x0.to_vec()).collect();
    let mut idx = Vec::with_capacity(spec.s);
    let mut z = [vec![0.0; d], vec![0.0; d]];
    let mut b = vec![0.0; d];
    let mut grad_evals = 0u64;
    let block_len = if spec.split_time { 2 } else { 1 };
    let n_blocks = spec.n_fine_steps / block_len;
    for blk in 0..n_blocks {
        for zj in z.iter_mut().take(block_len) {
            gaussian.fill_gaussian(zj);
        }
        for (slot, &(bs, coarse, on)) in slots.iter().enumerate() {
            if !on {
                continue;
            }
            let x = &mut pos[slot];
            if coarse {
                samplers[slot].draw_into(&mut batch_streams[slot], bs, &mut idx);
                model.estimated_drift(x, &idx, &mut b);
                grad_evals += bs as u64;
                for i in 0..d {
                    x[i] += 2.0 * h * b[i] + beta * (sqrt_h * z[0][i] + sqrt_h * z[1][i]);
                }
            } else {
                for zj in z.iter().take(block_len) {
                    samplers[slot].draw_into(&mut batch_streams[slot], bs, &mut idx);
                    model.estimated_drift(x, &idx, &mut b);
                    grad_evals += bs as u64;
                    for i in 0..d {
                        x[i] += h * b[i] + beta * (sqrt_h * zj[i]);
                    }
                }
            }
            if diverged(x) {
                return Err(Error::Divergence { step: ((blk + 1) * block_len) as u64, chain: None });
            }
        }
    }
    let mut positions: [Option<Vec<f64>>; 4] = [None, None, None, None];
    for (slot, p) in pos.into_iter().enumerate() {
        if slots[slot].2 {
            positions[slot] = Some(p);
        }
    }
    Ok(PlainCluster { positions, grad_evals })
}
