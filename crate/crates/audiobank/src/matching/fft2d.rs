//! Minimal 2-D FFT on row-major complex buffers (rows, then columns via
//! transpose), built on rustfft's 1-D plans.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Smallest length >= `n` whose prime factors are all in {2, 3, 5}.
pub fn next_fast_len(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut m = n;
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

pub struct Fft2d {
    planner: FftPlanner<f64>,
    transpose_scratch: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
}

impl Fft2d {
    pub fn new() -> Self {
        Fft2d {
            planner: FftPlanner::new(),
            transpose_scratch: Vec::new(),
            fft_scratch: Vec::new(),
        }
    }

    fn run_axis(&mut self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex<f64>], len: usize) {
        let need = fft.get_inplace_scratch_len();
        if self.fft_scratch.len() < need {
            self.fft_scratch.resize(need, Complex::new(0.0, 0.0));
        }
        for chunk in buf.chunks_exact_mut(len) {
            fft.process_with_scratch(chunk, &mut self.fft_scratch);
        }
    }

    fn transpose(&mut self, buf: &mut [Complex<f64>], rows: usize, cols: usize) {
        if self.transpose_scratch.len() < buf.len() {
            self.transpose_scratch
                .resize(buf.len(), Complex::new(0.0, 0.0));
        }
        for r in 0..rows {
            for c in 0..cols {
                self.transpose_scratch[c * rows + r] = buf[r * cols + c];
            }
        }
        buf.copy_from_slice(&self.transpose_scratch[..buf.len()]);
    }

    fn run(&mut self, buf: &mut [Complex<f64>], rows: usize, cols: usize, forward: bool) {
        assert_eq!(buf.len(), rows * cols);
        let row_fft = if forward {
            self.planner.plan_fft_forward(cols)
        } else {
            self.planner.plan_fft_inverse(cols)
        };
        let col_fft = if forward {
            self.planner.plan_fft_forward(rows)
        } else {
            self.planner.plan_fft_inverse(rows)
        };
        self.run_axis(&row_fft, buf, cols);
        self.transpose(buf, rows, cols);
        self.run_axis(&col_fft, buf, rows);
        self.transpose(buf, cols, rows);
    }

    /// In-place unnormalized forward transform of a rows x cols buffer.
    pub fn forward(&mut self, buf: &mut [Complex<f64>], rows: usize, cols: usize) {
        self.run(buf, rows, cols, true);
    }

    /// In-place unnormalized inverse transform; divide by `rows * cols`
    /// to recover values.
    pub fn inverse(&mut self, buf: &mut [Complex<f64>], rows: usize, cols: usize) {
        self.run(buf, rows, cols, false);
    }
}

impl Default for Fft2d {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(8), 8);
        assert_eq!(next_fast_len(129), 135);
        assert_eq!(next_fast_len(213), 216);
        assert_eq!(next_fast_len(7), 8);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let (rows, cols) = (12, 15);
        let mut rng = crate::seeds::rng_for(1, "fft2d", 0);
        let original: Vec<Complex<f64>> = (0..rows * cols)
            .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut buf = original.clone();
        let mut fft = Fft2d::new();
        fft.forward(&mut buf, rows, cols);
        fft.inverse(&mut buf, rows, cols);
        let scale = (rows * cols) as f64;
        for (a, b) in buf.iter().zip(&original) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let (rows, cols) = (4, 5);
        let mut rng = crate::seeds::rng_for(2, "fft2d", 0);
        let input: Vec<Complex<f64>> = (0..rows * cols)
            .map(|_| Complex::new(rng.random::<f64>(), 0.0))
            .collect();
        let mut buf = input.clone();
        Fft2d::new().forward(&mut buf, rows, cols);
        for p in 0..rows {
            for q in 0..cols {
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..rows {
                    for c in 0..cols {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (p as f64 * r as f64 / rows as f64
                                + q as f64 * c as f64 / cols as f64);
                        acc += input[r * cols + c] * Complex::new(phase.cos(), phase.sin());
                    }
                }
                assert!((buf[p * cols + q] - acc).norm() < 1e-9);
            }
        }
    }
}
