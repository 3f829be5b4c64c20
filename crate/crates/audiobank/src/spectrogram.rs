//! Short-time power spectrogram.
//!
//! Frames of length `N` advance by `M` samples; each frame is Hamming
//! windowed and transformed, and the squared magnitude of the one-sided
//! spectrum (bins `0..=N/2`) is kept.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::Signal;
use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 4] = b"ABSG";

/// Symmetric Hamming window, `w(n) = 0.54 - 0.46 cos(2 pi n / (N-1))`.
pub fn hamming(len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::WindowTooShort(len));
    }
    let denom = (len - 1) as f64;
    Ok((0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hamming,
}

/// Analysis window length, framing step, and window family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrogramParams {
    pub window_len: usize,
    pub step: usize,
    pub window_kind: WindowKind,
}

impl SpectrogramParams {
    pub fn new(window_len: usize, step: usize) -> Result<Self> {
        if window_len < 2 || !window_len.is_multiple_of(2) {
            return Err(Error::InvalidSpectrogramParams(format!(
                "window length {window_len} must be even and >= 2"
            )));
        }
        if step == 0 || step > window_len {
            return Err(Error::InvalidSpectrogramParams(format!(
                "step {step} must satisfy 0 < step <= window length {window_len}"
            )));
        }
        Ok(SpectrogramParams {
            window_len,
            step,
            window_kind: WindowKind::Hamming,
        })
    }

    /// One-sided bin count `N/2 + 1`.
    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frames a signal of `len` samples yields.
    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.step + 1
        }
    }
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        SpectrogramParams::new(256, 128).expect("default params are valid")
    }
}

/// K x T grid of short-time power values, row-major by frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<f64>,
    bins: usize,
    frames: usize,
    pub params: SpectrogramParams,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn value(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.frames + frame]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row of all frames for one frequency bin.
    pub fn bin_row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn from_values(
        values: Vec<f64>,
        bins: usize,
        frames: usize,
        params: SpectrogramParams,
        sample_rate: u32,
    ) -> Result<Self> {
        if values.len() != bins * frames {
            return Err(Error::DimensionMismatch {
                expected: bins * frames,
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidMatrixEntry(i / frames, i % frames));
            }
        }
        Ok(Spectrogram {
            values,
            bins,
            frames,
            params,
            sample_rate,
        })
    }

    /// CSV export: one row per frequency bin (ascending), one column per frame.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for k in 0..self.bins {
            let row = self.bin_row(k);
            for (t, v) in row.iter().enumerate() {
                if t > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{v:.9e}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Compact binary dump: magic, K, T as u32 LE, then row-major f64 LE.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.bins as u32).to_le_bytes())?;
        w.write_all(&(self.frames as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(
        mut r: R,
        path: &Path,
        params: SpectrogramParams,
        sample_rate: u32,
    ) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::bad_format(path, "bad spectrogram magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|e| Error::io(path, e))?;
        let bins = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(|e| Error::io(path, e))?;
        let frames = u32::from_le_bytes(b4) as usize;
        let mut values = vec![0.0f64; bins * frames];
        let mut b8 = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut b8).map_err(|e| Error::io(path, e))?;
            *v = f64::from_le_bytes(b8);
        }
        Spectrogram::from_values(values, bins, frames, params, sample_rate)
    }
}

/// Windowed short-time power spectrum of `signal`.
pub fn compute_spectrogram(signal: &Signal, params: &SpectrogramParams) -> Result<Spectrogram> {
    let n = params.window_len;
    let len = signal.len();
    if len < n {
        return Err(Error::SignalTooShort { len, need: n });
    }
    let frames = params.frames_for(len);
    let bins = params.bins();
    let window = match params.window_kind {
        WindowKind::Hamming => hamming(n)?,
    };

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let x = signal.samples();
    let mut values = vec![0.0f64; bins * frames];
    for t in 0..frames {
        let start = t * params.step;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..bins {
            values[k * frames + t] = buf[k].norm_sqr();
        }
    }
    Spectrogram::from_values(values, bins, frames, *params, signal.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_signal(len: usize, seed: u64) -> Signal {
        let mut rng = crate::seeds::rng_for(seed, "spec-test", 0);
        Signal::new(
            (0..len).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
            44100,
        )
        .unwrap()
    }

    /// Direct O(N^2) evaluation of the short-time power spectrum.
    fn direct_spectrogram(signal: &Signal, params: &SpectrogramParams) -> Vec<f64> {
        let n = params.window_len;
        let frames = params.frames_for(signal.len());
        let bins = params.bins();
        let window = hamming(n).unwrap();
        let x = signal.samples();
        let mut out = vec![0.0; bins * frames];
        for t in 0..frames {
            for k in 0..bins {
                let (mut re, mut im) = (0.0, 0.0);
                for i in 0..n {
                    let theta = -2.0 * std::f64::consts::PI * (i * k) as f64 / n as f64;
                    let v = x[t * params.step + i] * window[i];
                    re += v * theta.cos();
                    im += v * theta.sin();
                }
                out[k * frames + t] = re * re + im * im;
            }
        }
        out
    }

    #[test]
    fn hamming_reference_points() {
        let w = hamming(3).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[1] - 1.0).abs() < 1e-15);
        assert!((w[2] - 0.08).abs() < 1e-15);
        assert!(hamming(1).is_err());
    }

    #[test]
    fn hamming_symmetric_and_bounded() {
        for n in [2, 5, 64, 256, 257] {
            let w = hamming(n).unwrap();
            for i in 0..n {
                assert!((w[i] - w[n - 1 - i]).abs() < 1e-15);
                assert!(w[i] >= 0.08 - 1e-15 && w[i] <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn zero_signal_zero_spectrogram() {
        let s = Signal::new(vec![0.0; 1000], 44100).unwrap();
        let sp = compute_spectrogram(&s, &SpectrogramParams::default()).unwrap();
        assert_eq!(sp.bins(), 129);
        assert_eq!(sp.frames(), (1000 - 256) / 128 + 1);
        assert!(sp.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_impulse_flat_across_frequency() {
        let params = SpectrogramParams::new(64, 32).unwrap();
        let mut x = vec![0.0; 256];
        let n0 = 40; // inside frame t=1 (samples 32..96)
        x[n0] = 1.0;
        let s = Signal::new(x, 8000).unwrap();
        let sp = compute_spectrogram(&s, &params).unwrap();
        let w = hamming(64).unwrap();
        let expected = w[n0 - 32] * w[n0 - 32];
        for k in 0..sp.bins() {
            assert!((sp.value(k, 1) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_summation() {
        let params = SpectrogramParams::default();
        let s = random_signal(1024, 11);
        let fast = compute_spectrogram(&s, &params).unwrap();
        let direct = direct_spectrogram(&s, &params);
        let mut worst = 0.0f64;
        for (a, b) in fast.values().iter().zip(&direct) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-30);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-9, "max relative error {worst:e}");
    }

    #[test]
    fn frame_count_identity() {
        let params = SpectrogramParams::default();
        for len in [256, 257, 383, 384, 1000, 4096] {
            let s = Signal::new(vec![0.1; len], 44100).unwrap();
            let sp = compute_spectrogram(&s, &params).unwrap();
            assert_eq!(sp.frames(), (len - 256) / 128 + 1);
        }
        let short = Signal::new(vec![0.1; 255], 44100).unwrap();
        assert!(matches!(
            compute_spectrogram(&short, &params),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn amplitude_scaling_is_quadratic() {
        let s = random_signal(800, 3);
        let scaled = s.scaled(0.5).unwrap();
        let p = SpectrogramParams::default();
        let a = compute_spectrogram(&s, &p).unwrap();
        let b = compute_spectrogram(&scaled, &p).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            let rel = (y - 0.25 * x).abs() / (0.25 * x).abs().max(1e-30);
            assert!(rel < 1e-9);
        }
    }

    #[test]
    fn binary_round_trip() {
        let s = random_signal(700, 5);
        let p = SpectrogramParams::default();
        let sp = compute_spectrogram(&s, &p).unwrap();
        let mut buf = Vec::new();
        sp.write_binary(&mut buf).unwrap();
        let back =
            Spectrogram::read_binary(buf.as_slice(), Path::new("mem"), p, s.sample_rate()).unwrap();
        assert_eq!(sp, back);
    }
}
