//! Seeded random streams.
//!
//! Every chain, replicate and precompute node owns its own stream. Streams are
//! derived from a master seed, an index and a purpose tag through a SplitMix64
//! mixing chain, so the mapping is identical on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a derived stream is used for. The tag keeps streams for different
/// purposes independent even when they share a master seed and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Macroscopic proposals and both accept/reject draws of a micro-macro step.
    Macro,
    /// Microscopic Langevin moves (plain MALA chains and biased reconstruction).
    Micro,
    /// Initial condition of a chain.
    Init,
    /// Biased chains of the table precomputation, one per grid node.
    Precompute,
    /// Gaussian draws for the normalization-constant table.
    NormalizationConstant,
    /// Direct reconstruction draws.
    Reconstruction,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Macro => 0x6d61_6372,
            Purpose::Micro => 0x6d69_6372,
            Purpose::Init => 0x696e_6974,
            Purpose::Precompute => 0x7072_6563,
            Purpose::NormalizationConstant => 0x6e6c_616d,
            Purpose::Reconstruction => 0x7265_636f,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the substream `(master, index, purpose)`.
pub fn derive_seed(master: u64, index: u64, purpose: Purpose) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ index);
    splitmix64(h ^ purpose.tag())
}

/// A deterministic stream of uniform and standard normal variates.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn substream(master: u64, index: u64, purpose: Purpose) -> Self {
        Self::new(derive_seed(master, index, purpose))
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }

    /// Metropolis test: returns true with probability `min(1, exp(log_ratio))`.
    /// A NaN ratio is a rejection.
    #[inline]
    pub fn accept(&mut self, log_ratio: f64) -> bool {
        if log_ratio >= 0.0 {
            return true;
        }
        if !(log_ratio > f64::NEG_INFINITY) {
            return false;
        }
        self.uniform().ln() < log_ratio
    }
}

/// The two streams a micro-macro chain consumes. Macroscopic draws and
/// microscopic draws are kept apart so that runs differing only in
/// microscopic settings share the same macroscopic randomness.
#[derive(Debug, Clone)]
pub struct ChainStreams {
    pub macro_stream: RandomStream,
    pub micro_stream: RandomStream,
}

impl ChainStreams {
    pub fn new(master: u64, chain: u64) -> Self {
        Self {
            macro_stream: RandomStream::substream(master, chain, Purpose::Macro),
            micro_stream: RandomStream::substream(master, chain, Purpose::Micro),
        }
    }
}
