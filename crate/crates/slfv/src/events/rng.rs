use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based random stream: `(seed, stream, counter)` fully determines the
/// remaining sequence, and distinct stream indices are independent.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

/// Position of a stream, sufficient to resume it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub counter: u128,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn resume(state: RngState) -> Self {
        let mut s = RngStream::new(state.seed, state.stream);
        s.rng.set_word_pos(state.counter);
        s
    }

    pub fn state(&self) -> RngState {
        RngState { seed: self.seed, stream: self.stream, counter: self.rng.get_word_pos() }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential waiting time with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -(1.0 - self.uniform()).ln() / rate
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
