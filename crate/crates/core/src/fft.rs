//! Square 2-D FFTs on row-major buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse 2-D transform of an `n x n` row-major array. The inverse is
/// normalized so that `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(data, scratch, &self.fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(data, scratch, &self.inv);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        plan.process(data);
        transpose(data, scratch, n);
        plan.process(data);
        transpose(data, scratch, n);
    }
}

fn transpose(data: &mut [Complex64], scratch: &mut Vec<Complex64>, n: usize) {
    scratch.clear();
    scratch.extend_from_slice(data);
    for i in 0..n {
        for j in 0..n {
            data[j * n + i] = scratch[i * n + j];
        }
    }
}

/// Spectrum of a convolution kernel sampled at the wrapped offsets of an
/// `n x n` periodic grid with spacing `h`: entry `(iy, ix)` holds
/// `kernel(dx, dy)` with `dx = h * (ix if ix < n/2 else ix - n)`.
pub fn kernel_spectrum<F>(fft: &Fft2, h: f64, kernel: F) -> Vec<Complex64>
where
    F: Fn(f64, f64) -> Complex64,
{
    let n = fft.n();
    let wrap = |i: usize| {
        let i = i as i64;
        let n = n as i64;
        (if i < n / 2 { i } else { i - n }) as f64 * h
    };
    let mut data: Vec<Complex64> = (0..n * n).map(|idx| kernel(wrap(idx % n), wrap(idx / n))).collect();
    let mut scratch = Vec::new();
    fft.forward(&mut data, &mut scratch);
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = Fft2::new(8);
        let orig: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut d = orig.clone();
        let mut s = Vec::new();
        f.forward(&mut d, &mut s);
        f.inverse(&mut d, &mut s);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn circular_convolution_matches_direct_sum() {
        let n = 8;
        let f = Fft2::new(n);
        let a: Vec<Complex64> = (0..n * n).map(|i| Complex64::new((i as f64 * 0.7).sin(), 0.0)).collect();
        let b: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(0.0, (i as f64 * 0.3).cos())).collect();
        let mut s = Vec::new();
        let (mut fa, mut fb) = (a.clone(), b.clone());
        f.forward(&mut fa, &mut s);
        f.forward(&mut fb, &mut s);
        let mut c: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        f.inverse(&mut c, &mut s);
        for y in 0..n {
            for x in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for v in 0..n {
                    for u in 0..n {
                        acc += a[v * n + u] * b[((y + n - v) % n) * n + (x + n - u) % n];
                    }
                }
                assert!((acc - c[y * n + x]).norm() < 1e-9);
            }
        }
    }
}
