//! Keyed, counter-addressed random streams.
//!
//! Every random quantity in a simulation is drawn from a ChaCha8 stream whose
//! 256-bit key is the tuple `(master_seed, path, l1, l2, role)`. Streams never
//! share state, so a path's draws depend only on its key and on how many words
//! it has consumed, never on which thread ran it or in what order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

/// What a stream is used for. Distinct roles under one path key are independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Shared Brownian increments `Z_k`.
    Gaussian,
    /// Shared fine-level mini-batches `U^f_k`.
    FineBatch,
    /// Independent batches of the `i`-th chain in a non-antithetic difference.
    PlainBatch(u8),
    /// Independent single-chain Monte Carlo.
    MonteCarlo,
    /// Synthetic data generation.
    Data,
    /// Free-form user stream.
    Custom(u32),
}

impl Role {
    fn code(self) -> u32 {
        match self {
            Role::Gaussian => 1,
            Role::FineBatch => 2,
            Role::PlainBatch(i) => 0x100 | i as u32,
            Role::MonteCarlo => 3,
            Role::Data => 4,
            Role::Custom(c) => 0x8000_0000 | c,
        }
    }
}

/// Address of one path's randomness: everything except the role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub ell1: u32,
    pub ell2: u32,
    pub path: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, ell1: u32, ell2: u32, path: u64) -> Self {
        Self { master_seed, ell1, ell2, path }
    }

    pub fn stream(&self, role: Role) -> NoiseSource {
        NoiseSource::new(*self, role)
    }
}

/// A single keyed stream with a word counter.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    key: StreamKey,
    role: Role,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(key: StreamKey, role: Role) -> Self {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&key.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&key.path.to_le_bytes());
        seed[16..20].copy_from_slice(&key.ell1.to_le_bytes());
        seed[20..24].copy_from_slice(&key.ell2.to_le_bytes());
        seed[24..28].copy_from_slice(&role.code().to_le_bytes());
        seed[28..32].copy_from_slice(b"MASG");
        Self { key, role, rng: ChaCha8Rng::from_seed(seed) }
    }

    /// Convenience constructor for streams that are not tied to a level.
    pub fn from_seed(master_seed: u64, role: Role) -> Self {
        Self::new(StreamKey::new(master_seed, 0, 0, 0), role)
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Jump to an absolute word position.
    pub fn seek(&mut self, counter: u128) {
        self.rng.set_word_pos(counter);
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `(0, 1]` with 53 bits of resolution.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals (Box-Muller). Always consumes exactly
    /// four words, so the `n`-th pair sits at word `4n` of the stream.
    #[inline]
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = core::f64::consts::TAU * u2;
        (r * math::cos(theta), r * math::sin(theta))
    }

    /// Fill `out` with standard normals; an odd tail discards the spare draw so
    /// every vector of length `d` consumes `4 * ceil(d / 2)` words.
    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.gaussian_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.gaussian_pair().0;
        }
    }

    pub fn gaussian(&mut self) -> f64 {
        self.gaussian_pair().0
    }

    /// Unbiased integer in `[0, n)` (Lemire's multiply-and-reject).
    #[inline]
    pub fn index_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        loop {
            let x = self.next_u64();
            let wide = (x as u128) * (n as u128);
            let low = wide as u64;
            if low >= n || low >= n.wrapping_neg() % n {
                return (wide >> 64) as usize;
            }
        }
    }
}
