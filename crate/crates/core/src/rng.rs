//! Counter-based random streams.
//!
//! Every simulated row draws from its own ChaCha stream, addressed by
//! `(domain, time index, row)`. Results therefore do not depend on the number
//! of threads or on the order in which rows are generated, and clouds at
//! different time indices never share random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent families of streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    /// Regression clouds.
    Cloud = 1,
    /// Fresh samples used to measure errors out of sample.
    Evaluation = 2,
    /// Anything else (nested Monte Carlo oracles, property tests).
    Auxiliary = 3,
}

/// Factory of per-row generators.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    seed: u64,
    key: <ChaCha8Rng as SeedableRng>::Seed,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for `row` of time index `index` in `domain`.
    ///
    /// # Panics
    ///
    /// If `index >= 2^24`.
    pub fn stream(&self, domain: Domain, index: usize, row: usize) -> ChaCha8Rng {
        assert!(index < 1 << 24, "time index {index} exceeds the stream layout");
        let row = row as u64 & 0xFFFF_FFFF;
        let id = ((domain as u64) << 56) | ((index as u64) << 32) | row;
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }
}
