//! Reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Generator behind every [`RngStream`].
pub type StreamRng = ChaCha20Rng;

/// A `(seed, stream_index)` pair. Identical pairs yield identical sequences;
/// distinct stream indices under one seed are independent ChaCha streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// Same seed, different stream.
    pub fn with_index(self, stream_index: u64) -> Self {
        Self { stream_index, ..self }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_index);
        r
    }
}
