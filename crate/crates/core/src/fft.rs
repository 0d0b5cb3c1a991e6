//! Radix-2 complex FFT for power-of-two lengths.
//!
//! Forward transform is `X[k] = Σ x[j] e^{-2πi jk/n}`; the inverse carries the
//! `1/n` factor so `inverse(forward(x)) == x` up to rounding.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Result};

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    /// `e^{-2πi j/n}` for `j < n/2`.
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(domain!("FFT length {n} is not a power of two >= 2"));
        }
        let twiddles = (0..n / 2)
            .map(|j| {
                let theta = -2.0 * PI * j as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
        Ok(Self {
            n,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "FFT buffer length mismatch");
        for (i, &j) in self.bitrev.iter().enumerate() {
            let j = j as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.n {
            let stride = self.n / (2 * half);
            for start in (0..self.n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let th = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                        v * Complex64::new(libm::cos(th), libm::sin(th))
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[2usize, 4, 8, 64, 256] {
            let x: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new(libm::sin(j as f64 * 0.37) + 0.1, libm::cos(j as f64 * 1.3)))
                .collect();
            let expected = naive_dft(&x);
            let mut got = x.clone();
            let fft = Fft::new(n).unwrap();
            fft.forward(&mut got);
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10 * n as f64, "n={n}: {a} vs {b}");
            }
            fft.inverse(&mut got);
            for (a, b) in got.iter().zip(&x) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(Fft::new(0).is_err());
        assert!(Fft::new(1).is_err());
        assert!(Fft::new(12).is_err());
    }
}
