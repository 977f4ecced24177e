use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Planned forward FFT of a fixed size.
#[derive(Clone)]
pub struct Fft {
    size: usize,
    plan: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Fft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft").field("size", &self.size).finish()
    }
}

impl Fft {
    pub fn new(size: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_forward(size);
        Fft { size, plan }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Forward transform of a complex sequence of exactly `size` points.
    pub fn forward(&self, input: &[Complex<f64>]) -> Vec<Complex<f64>> {
        assert_eq!(input.len(), self.size, "fft input length");
        let mut buf = input.to_vec();
        self.plan.process(&mut buf);
        buf
    }

    /// One-sided power spectrum `|X_k|^2`, `k = 0..=size/2`, of a real input
    /// zero-padded to `size`.
    pub fn power_spectrum(&self, input: &[f64]) -> Vec<f64> {
        assert!(input.len() <= self.size, "fft input longer than transform");
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (b, &x) in buf.iter_mut().zip(input) {
            b.re = x;
        }
        self.plan.process(&mut buf);
        buf[..=self.size / 2].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Direct `O(n^2)` DFT, used as a reference in tests.
pub fn dft_naive(input: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = input.len();
    (0..n)
        .map(|k| {
            input
                .iter()
                .enumerate()
                .map(|(t, &x)| {
                    let angle = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    x * Complex::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for size in [1usize, 2, 4, 8, 16, 32, 64, 5, 12, 48] {
            let x: Vec<Complex<f64>> = (0..size)
                .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let fast = Fft::new(size).forward(&x);
            let slow = dft_naive(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-9, "size {size}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn power_spectrum_of_impulse_is_flat() {
        let p = Fft::new(16).power_spectrum(&[1.0]);
        assert_eq!(p.len(), 9);
        assert!(p.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
