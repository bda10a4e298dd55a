//! Counter-based random streams.
//!
//! A stream is addressed by `(master seed, purpose, index)`. The ChaCha key
//! is derived from the seed and the purpose; the index selects the ChaCha
//! stream, so streams never overlap. Rare draws (killing thresholds, jump
//! clocks) are addressed by a further draw counter, which keeps them
//! independent of how many Gaussian increments a path consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Brownian = 1,
    Killing = 2,
    Jumps = 3,
    Resample = 4,
    Bootstrap = 5,
    Initial = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// Independent family of streams for a sub-experiment.
    pub fn fork_seed(master_seed: u64, tag: u64) -> u64 {
        splitmix(master_seed ^ splitmix(tag.wrapping_add(0x51ED_270B)))
    }

    pub fn with_index(&self, stream_index: u64) -> Self {
        Self { master_seed: self.master_seed, stream_index }
    }

    fn key(&self, purpose: Purpose, counter: u64) -> [u8; 32] {
        let mut key = [0u8; 32];
        let mut z = splitmix(self.master_seed) ^ splitmix((purpose as u64) << 32 ^ counter);
        for chunk in key.chunks_mut(8) {
            z = splitmix(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        key
    }

    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        self.rng_at(purpose, 0)
    }

    /// Generator for the `counter`-th rare draw of a purpose.
    pub fn rng_at(&self, purpose: Purpose, counter: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::from_seed(self.key(purpose, counter));
        r.set_stream(self.stream_index);
        r
    }

    /// Uniform on `(0, 1]` for the `counter`-th rare draw.
    pub fn uniform_at(&self, purpose: Purpose, counter: u64) -> f64 {
        let mut r = self.rng_at(purpose, counter);
        1.0 - r.random::<f64>()
    }

    /// `Exp(1)` by inversion for the `counter`-th rare draw.
    pub fn exp1_at(&self, purpose: Purpose, counter: u64) -> f64 {
        -libm::log(self.uniform_at(purpose, counter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_draws() {
        let a = RngStream::new(7, 3);
        let mut r1 = a.rng(Purpose::Brownian);
        let mut r2 = a.rng(Purpose::Brownian);
        for _ in 0..100 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
        assert_eq!(a.exp1_at(Purpose::Killing, 5), a.exp1_at(Purpose::Killing, 5));
    }

    #[test]
    fn distinct_addresses_differ() {
        let a = RngStream::new(7, 3);
        let b = RngStream::new(7, 4);
        let c = RngStream::new(8, 3);
        let x = a.rng(Purpose::Brownian).random::<u64>();
        assert_ne!(x, b.rng(Purpose::Brownian).random::<u64>());
        assert_ne!(x, c.rng(Purpose::Brownian).random::<u64>());
        assert_ne!(x, a.rng(Purpose::Killing).random::<u64>());
        assert_ne!(a.exp1_at(Purpose::Killing, 0), a.exp1_at(Purpose::Killing, 1));
    }

    #[test]
    fn exp_draws_have_unit_mean() {
        let s = RngStream::new(11, 0);
        let n = 20000;
        let m: f64 = (0..n).map(|k| s.exp1_at(Purpose::Killing, k)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 4.0 / (n as f64).sqrt());
    }
}
