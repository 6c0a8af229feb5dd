//! Counter-based random streams.
//!
//! Every random draw in a simulation comes from a stream identified by the
//! tuple `(master seed, worker, iteration, purpose)`. The tuple is hashed into
//! the key of a ChaCha generator, so streams can be created in any order and
//! on any thread without coordination, and the master can replay a worker's
//! draw by deriving the same stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream handed to compressors and samplers.
pub type Stream = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Starting point of a run.
    Start,
    /// Main (unbiased) message compression.
    Compress,
    /// Inner (biased) shift compressor.
    Inner,
    /// Reference-point refresh coin of randomized shifts.
    Refresh,
    /// Random states and vectors drawn by check suites.
    Sampling,
    /// Compressor constant calibration.
    Calibration,
    /// Synthetic data generation.
    Data,
    /// Row-to-worker assignment.
    Shard,
    /// Anything else, tagged by the caller.
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Start => 1,
            Purpose::Compress => 2,
            Purpose::Inner => 3,
            Purpose::Refresh => 4,
            Purpose::Sampling => 5,
            Purpose::Calibration => 6,
            Purpose::Data => 7,
            Purpose::Shard => 8,
            Purpose::Custom(t) => mix64(0x8000_0000_0000_0000 ^ t),
        }
    }
}

/// Derive the stream for `(master, worker, iteration, purpose)`.
pub fn seed_stream(master: u64, worker: u64, iteration: u64, purpose: Purpose) -> Stream {
    let mut h = mix64(master ^ 0x243F_6A88_85A3_08D3);
    h = mix64(h ^ worker.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    h = mix64(h ^ iteration.wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    h = mix64(h ^ purpose.tag().wrapping_mul(0x1656_67B1_9E37_79F9));
    let mut key = [0u8; 32];
    let mut state = h;
    for chunk in key.chunks_exact_mut(8) {
        state = mix64(state.wrapping_add(0x9E37_79B9_7F4A_7C15));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Identifies one communication round: all per-worker streams of the round
/// are derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RoundKey {
    pub seed: u64,
    pub round: u64,
}

impl RoundKey {
    pub fn new(seed: u64, round: u64) -> Self {
        Self { seed, round }
    }

    pub fn stream(&self, worker: usize, purpose: Purpose) -> Stream {
        seed_stream(self.seed, worker as u64, self.round, purpose)
    }
}

/// Derive the `index`-th child seed of `master`. Index 0 returns `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    if index == 0 {
        master
    } else {
        mix64(master ^ mix64(index.wrapping_add(0xD134_2543_DE82_EF95)))
    }
}

// splitmix64 finalizer
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
