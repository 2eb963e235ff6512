//! Seeded random streams.
//!
//! Every draw in the crate goes through [`RandomSource`], a ChaCha8 stream
//! keyed by `(seed, stream)`. Trainers open one stream per episode so that
//! reordering or parallelising episodes never changes what any single
//! episode sees.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream-id offsets that keep the different consumers of a run seed apart.
pub mod streams {
    /// Training episodes use `TRAIN + episode`.
    pub const TRAIN: u64 = 0;
    /// Fresh rollouts for the dual step (when not reusing the primal trajectory).
    pub const DUAL: u64 = 1 << 62;
    /// Evaluation episodes use `EVAL + episode`.
    pub const EVAL: u64 = 1 << 63;
    /// Instance generation, grid sampling and other one-off uses.
    pub const AUX: u64 = (1 << 63) | (1 << 62);
}

#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Index drawn from a categorical distribution given by `probs`.
    ///
    /// Falls back to the last index with positive mass when rounding leaves the
    /// cumulative sum a hair below the uniform draw.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last = i;
            }
            acc += p;
            if u < acc {
                return i;
            }
        }
        last
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
