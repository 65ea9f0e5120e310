//! Named random substreams derived from a run's master seed.
//!
//! Every stream is the same ChaCha key (from the seed) with a distinct
//! stream id, so drawing more numbers from one stream never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EnvPatterns,
    EnvNoise,
    WorldModelInit,
    CriticInit,
    RndTargetInit,
    RndPredictorInit,
    Policy,
    Warmup,
    /// Random matrices and sample sets for the identity checks.
    Theory,
    /// Free-form streams for tests and tools.
    Aux(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::EnvPatterns => 1,
            Stream::EnvNoise => 2,
            Stream::WorldModelInit => 3,
            Stream::CriticInit => 4,
            Stream::RndTargetInit => 5,
            Stream::RndPredictorInit => 6,
            Stream::Policy => 7,
            Stream::Warmup => 8,
            Stream::Theory => 9,
            Stream::Aux(k) => 1_000 + u64::from(k),
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
