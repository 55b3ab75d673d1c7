//! Seeded, splittable randomness.
//!
//! Every random draw in the crate comes from a [`SeedStream`]. A stream is a
//! ChaCha8 keystream keyed by the master seed and selected by the stream
//! index, so replication `k` of an experiment always sees the same numbers
//! no matter how many worker threads run the experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Stream for replication `index` of an experiment seeded by `master_seed`.
    pub fn replication(master_seed: u64, index: usize) -> Self {
        Self::new(master_seed, index as u64)
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.stream_index);
        StreamRng { inner }
    }
}

/// Generator handed out by [`SeedStream::generator`].
///
/// Not shared between threads; each replication owns its own.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Standard normal draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}
