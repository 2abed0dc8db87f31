use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::NoiseSource;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ReplacementMode {
    With,
    #[default]
    Without,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub mode: ReplacementMode,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Reusable batch drawer. Sampling without replacement runs a partial
/// Fisher-Yates shuffle over a persistent permutation, which yields a uniform
/// ordered `s`-subset whatever state the permutation is left in.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    m: usize,
    mode: ReplacementMode,
    perm: Vec<usize>,
}

impl BatchSampler {
    pub fn new(m: usize, mode: ReplacementMode) -> Self {
        let perm = match mode {
            ReplacementMode::Without => (0..m).collect(),
            ReplacementMode::With => Vec::new(),
        };
        Self { m, mode, perm }
    }

    pub fn mode(&self) -> ReplacementMode {
        self.mode
    }

    pub fn check(&self, s: usize) -> Result<()> {
        if s == 0 || (self.mode == ReplacementMode::Without && s > self.m) {
            return Err(Error::Range { s, m: self.m });
        }
        Ok(())
    }

    /// Draw `s` indices into `out` (cleared first). Caller must have checked `s`.
    pub fn draw_into(&mut self, noise: &mut NoiseSource, s: usize, out: &mut Vec<usize>) {
        out.clear();
        match self.mode {
            ReplacementMode::With => {
                out.extend((0..s).map(|_| noise.index_below(self.m)));
            }
            ReplacementMode::Without => {
                debug_assert!(s <= self.m);
                for i in 0..s {
                    let j = i + noise.index_below(self.m - i);
                    self.perm.swap(i, j);
                }
                out.extend_from_slice(&self.perm[..s]);
            }
        }
    }
}

/// Draw one batch of size `s` from `0..m`.
pub fn sample_batch(noise: &mut NoiseSource, s: usize, m: usize, mode: ReplacementMode) -> Result<Batch> {
    let mut sampler = BatchSampler::new(m, mode);
    sampler.check(s)?;
    let mut indices = Vec::with_capacity(s);
    sampler.draw_into(noise, s, &mut indices);
    Ok(Batch { indices, mode })
}

/// First and second half of an even-sized batch.
pub fn split_batch(b: &Batch) -> Result<(Batch, Batch)> {
    let n = b.indices.len();
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddBatch(n));
    }
    let (lo, hi) = b.indices.split_at(n / 2);
    Ok((Batch { indices: lo.to_vec(), mode: b.mode }, Batch { indices: hi.to_vec(), mode: b.mode }))
}
