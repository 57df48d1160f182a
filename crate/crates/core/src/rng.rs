//! Counter-based random streams keyed by `(seed, stream_id)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Named substreams so that changing one kind of draw never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Frequencies = 0,
    Energies = 1,
    Phases = 2,
    SamplingTimes = 3,
    Langevin = 4,
}

/// Number of stream ids reserved per bath.
const STREAMS_PER_BATH: u64 = 16;

/// Deterministic generator for one `(seed, stream_id)` pair.
///
/// Backed by ChaCha12 with the stream id mapped onto ChaCha's 64-bit stream
/// counter, so sequences are identical across platforms and runs.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for draws of `kind` belonging to bath number `bath_index`.
    pub fn for_bath(seed: u64, bath_index: usize, kind: StreamKind) -> Self {
        Self::new(seed, bath_index as u64 * STREAMS_PER_BATH + kind as u64)
    }

    /// Stream for draws not tied to a particular bath.
    pub fn global(seed: u64, kind: StreamKind) -> Self {
        Self::new(seed, u64::MAX - kind as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        self.rng.sample(rand::distributions::Open01)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }
}
