//! Per-trajectory random streams.
//!
//! Every stream is ChaCha8 keyed by the master seed and positioned on the
//! ChaCha stream id equal to the trajectory index. The 256-bit key is the
//! master seed expanded by four SplitMix64 outputs. Two streams with the same
//! `(master_seed, index)` produce identical sequences regardless of which
//! thread draws them or in which order trajectories are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{domain, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    master_seed: u64,
    index: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = master_seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(index);
        Self {
            inner,
            master_seed,
            index,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`; safe to take the logarithm of.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Exponential variate with the given rate, `None` when the rate is zero.
    pub fn exponential(&mut self, rate: f64) -> Result<Option<f64>> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(domain!("exponential rate must be finite and >= 0, got {rate}"));
        }
        if rate == 0.0 {
            return Ok(None);
        }
        Ok(Some(-libm::log(self.uniform_open0()) / rate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut s1 = RngStream::new(42, 7);
        let mut s2 = RngStream::new(42, 7);
        let mut s3 = RngStream::new(42, 8);
        let mut s4 = RngStream::new(43, 7);
        let mut same_other = 0;
        for _ in 0..100 {
            let x = s1.next_u64();
            assert_eq!(x, s2.next_u64());
            if x == s3.next_u64() || x == s4.next_u64() {
                same_other += 1;
            }
        }
        assert_eq!(same_other, 0);
    }

    #[test]
    fn uniform_in_range() {
        let mut s = RngStream::new(1, 0);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = s.uniform_open0();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn exponential_rejects_negative() {
        let mut s = RngStream::new(1, 0);
        assert!(s.exponential(-1.0).is_err());
        assert!(s.exponential(f64::NAN).is_err());
        assert_eq!(s.exponential(0.0).unwrap(), None);
    }
}
