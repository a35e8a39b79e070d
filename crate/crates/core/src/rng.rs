//! Deterministic, independently seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a stream is used for. Each purpose in each trial gets its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Channel = 1,
    Data = 2,
    Noise = 3,
    PilotPhase = 4,
    PilotInterference = 5,
    PilotNoise = 6,
    Oracle = 7,
}

/// `(seed, trial, purpose)` names a ChaCha stream.
///
/// The seed keys the generator and `(trial, purpose)` selects the 64-bit
/// stream word, so streams never overlap and the same triple always
/// reproduces the same draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub trial: u64,
    pub purpose: Purpose,
}

impl RngStream {
    pub fn new(seed: u64, trial: u64, purpose: Purpose) -> Self {
        RngStream {
            seed,
            trial,
            purpose,
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream((self.trial << 8) | self.purpose as u64);
        rng
    }
}
