//! Closed-form and brute-force references for the scalar OU chain and for
//! mini-batch drift estimators.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::models::ReplacementMode;

/// Largest dataset the enumeration oracles accept.
pub const ENUMERATION_MAX_M: usize = 8;

/// Scalar OU chain `X' = X + h(-alpha X + mean(xi over batch)) + sqrt(h/m) Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuSpec {
    pub alpha: f64,
    pub h: f64,
    pub m: usize,
    pub data: Vec<f64>,
    /// Variance of `X_0`.
    pub v0: f64,
    pub s: usize,
}

impl OuSpec {
    fn contraction(&self) -> f64 {
        1.0 - self.alpha * self.h
    }

    /// `sum_{j=1..k} (1 - alpha h)^{2(k-j)}`
    fn geometric(&self, k: u32) -> f64 {
        let r = self.contraction() * self.contraction();
        let mut acc = 0.0;
        let mut term = 1.0;
        for _ in 0..k {
            acc += term;
            term *= r;
        }
        acc
    }

    fn data_spread(&self) -> f64 {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        let mean_sq = self.data.iter().map(|v| v * v).sum::<f64>() / n;
        mean_sq - mean * mean
    }
}

/// `Var[X_k]` of the full-data chain.
pub fn ou_variance_exact(spec: &OuSpec, k: u32) -> f64 {
    math::powi(spec.contraction(), 2 * k as i32) * spec.v0 + spec.h / spec.m as f64 * spec.geometric(k)
}

/// `Var[X_k]` of the chain whose data mean is replaced by the mean over
/// `s` indices drawn with replacement, started from the same `X_0`.
pub fn ou_variance_subsampled_exact(spec: &OuSpec, k: u32) -> f64 {
    ou_variance_exact(spec, k) + spec.h * spec.h / spec.s as f64 * spec.data_spread() * spec.geometric(k)
}

/// Same as [`ou_variance_subsampled_exact`] for either replacement mode.
pub fn ou_variance_subsampled(spec: &OuSpec, k: u32, mode: ReplacementMode) -> Result<f64> {
    let factor = subsample_variance_exact(&spec.data, spec.s, mode)?;
    Ok(ou_variance_exact(spec, k) + spec.h * spec.h * factor * spec.geometric(k))
}

/// `E[X_k]` from a deterministic start `x0`.
pub fn ou_mean(spec: &OuSpec, x0: f64, k: u32) -> f64 {
    let n = spec.data.len() as f64;
    let mean = spec.data.iter().sum::<f64>() / n;
    let c = math::powi(spec.contraction(), k as i32);
    c * x0 + (1.0 - c) * mean / spec.alpha
}

fn population_spread(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn check_range(m: usize, s: usize, mode: ReplacementMode) -> Result<()> {
    if m == 0 {
        return Err(Error::Data("empty dataset"));
    }
    if s == 0 || (mode == ReplacementMode::Without && s > m) {
        return Err(Error::Range { s, m });
    }
    Ok(())
}

/// Exact variance of the batch mean of `data` over a uniform batch of size `s`.
///
/// With replacement this is `sigma^2 / s`, `sigma^2` the population variance.
/// Without replacement it is `sigma^2 / s * (m - s) / (m - 1)`.
pub fn subsample_variance_exact(data: &[f64], s: usize, mode: ReplacementMode) -> Result<f64> {
    let m = data.len();
    check_range(m, s, mode)?;
    let base = population_spread(data) / s as f64;
    Ok(match mode {
        ReplacementMode::With => base,
        ReplacementMode::Without if m == 1 => 0.0,
        ReplacementMode::Without => base * (m - s) as f64 / (m - 1) as f64,
    })
}

/// `sigma^2 / s`, times `1 - s/m` without replacement. Equals the exact
/// variance with replacement and bounds it from below without.
pub fn subsample_variance_bound(data: &[f64], s: usize, mode: ReplacementMode) -> Result<f64> {
    let m = data.len();
    check_range(m, s, mode)?;
    let base = population_spread(data) / s as f64;
    Ok(match mode {
        ReplacementMode::With => base,
        ReplacementMode::Without => base * (1.0 - s as f64 / m as f64),
    })
}

/// Visit every equally likely batch: all `m^s` ordered tuples with
/// replacement, all `C(m, s)` subsets without. Returns the number visited.
pub fn enumerate_batches<F: FnMut(&[usize])>(m: usize, s: usize, mode: ReplacementMode, mut visit: F) -> Result<u64> {
    if m > ENUMERATION_MAX_M {
        return Err(Error::Complexity { m, max: ENUMERATION_MAX_M });
    }
    check_range(m, s, mode)?;
    let mut idx = vec![0usize; s];
    let mut count = 0u64;
    match mode {
        ReplacementMode::With => loop {
            visit(&idx);
            count += 1;
            let mut p = s;
            loop {
                if p == 0 {
                    return Ok(count);
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < m {
                    break;
                }
                idx[p] = 0;
            }
        },
        ReplacementMode::Without => {
            for (i, v) in idx.iter_mut().enumerate() {
                *v = i;
            }
            loop {
                visit(&idx);
                count += 1;
                let mut p = s;
                loop {
                    if p == 0 {
                        return Ok(count);
                    }
                    p -= 1;
                    if idx[p] < m - s + p {
                        idx[p] += 1;
                        for q in p + 1..s {
                            idx[q] = idx[q - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
    }
}

/// Central moment of order `order` of the batch mean of `kernel(x, xi)`,
/// averaged over all batches.
fn enumerated_central_moment<K: Fn(f64, f64) -> f64>(
    data: &[f64],
    x: f64,
    s: usize,
    mode: ReplacementMode,
    kernel: &K,
    order: i32,
) -> Result<f64> {
    let values: Vec<f64> = data.iter().map(|&d| kernel(x, d)).collect();
    let exact = values.iter().sum::<f64>() / values.len() as f64;
    let mut acc = 0.0;
    let n = enumerate_batches(data.len(), s, mode, |b| {
        let mean = b.iter().map(|&i| values[i]).sum::<f64>() / s as f64;
        acc += math::powi(mean - exact, order);
    })?;
    Ok(acc / n as f64)
}

/// Variance of the batch mean by visiting every batch.
pub fn subsample_variance_enumerated(data: &[f64], s: usize, mode: ReplacementMode) -> Result<f64> {
    enumerated_central_moment(data, 0.0, s, mode, &|_, d| d, 2)
}

/// `E|b(x, U) - a(x)|^4` by visiting every batch, where `b` is the batch
/// mean of `kernel(x, xi)` and `a` the full mean.
pub fn subsample_fourth_moment_enumerated<K: Fn(f64, f64) -> f64>(
    data: &[f64],
    x: f64,
    s: usize,
    mode: ReplacementMode,
    kernel: K,
) -> Result<f64> {
    enumerated_central_moment(data, x, s, mode, &kernel, 4)
}

/// Scalar OU kernel `-alpha x + xi`.
pub fn ou_kernel(alpha: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, xi| -alpha * x + xi
}

/// Fourth central moment of the batch mean summed term by term.
///
/// With replacement the cross terms of independent centred draws vanish and
/// the sum is `(s mu4 + 3 s (s - 1) mu2^2) / s^4`. Without replacement every
/// quadruple of indices is expanded through the inclusion indicators, using
/// `P(r given indices all drawn) = s(s-1)..(s-r+1) / m(m-1)..(m-r+1)`.
pub fn subsample_fourth_moment_termwise<K: Fn(f64, f64) -> f64>(
    data: &[f64],
    x: f64,
    s: usize,
    mode: ReplacementMode,
    kernel: K,
) -> Result<f64> {
    let m = data.len();
    check_range(m, s, mode)?;
    let values: Vec<f64> = data.iter().map(|&d| kernel(x, d)).collect();
    let exact = values.iter().sum::<f64>() / m as f64;
    let c: Vec<f64> = values.iter().map(|v| v - exact).collect();
    let sf = s as f64;
    match mode {
        ReplacementMode::With => {
            let mu2 = c.iter().map(|v| v * v).sum::<f64>() / m as f64;
            let mu4 = c.iter().map(|v| math::powi(*v, 4)).sum::<f64>() / m as f64;
            Ok((sf * mu4 + 3.0 * sf * (sf - 1.0) * mu2 * mu2) / math::powi(sf, 4))
        }
        ReplacementMode::Without => {
            let p = sf / m as f64;
            // P(all of r distinct indices drawn)
            let incl = |r: usize| -> f64 {
                (0..r).map(|k| (s as f64 - k as f64) / (m as f64 - k as f64)).product::<f64>().max(0.0)
            };
            let mut total = 0.0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let quad = [i, j, k, l];
                            // distinct indices with multiplicities
                            let mut ids: [(usize, i32); 4] = [(usize::MAX, 0); 4];
                            let mut n_ids = 0;
                            for &q in &quad {
                                if let Some(e) = ids[..n_ids].iter_mut().find(|e| e.0 == q) {
                                    e.1 += 1;
                                } else {
                                    ids[n_ids] = (q, 1);
                                    n_ids += 1;
                                }
                            }
                            // (Z - p)^k = A_k Z + B_k with Z in {0, 1}
                            let ab: Vec<(f64, f64)> = ids[..n_ids]
                                .iter()
                                .map(|&(_, k)| {
                                    let b = math::powi(-p, k);
                                    (math::powi(1.0 - p, k) - b, b)
                                })
                                .collect();
                            let mut e = 0.0;
                            for mask in 0u32..(1 << n_ids) {
                                let mut prod = 1.0;
                                for (t, &(a, b)) in ab.iter().enumerate() {
                                    prod *= if mask & (1 << t) != 0 { a } else { b };
                                }
                                e += prod * incl(mask.count_ones() as usize);
                            }
                            total += c[i] * c[j] * c[k] * c[l] * e;
                        }
                    }
                }
            }
            Ok(total / math::powi(sf, 4))
        }
    }
}
