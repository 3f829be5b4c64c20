//! Per-position histogram fields and the Bhattacharyya coefficient.
//!
//! The spectrogram is converted to log power, min-max normalized per
//! utterance, hard-quantized into `B` intensity labels, and each grid
//! position gets the normalized label histogram of its local patch. The
//! log floor is relative to the utterance peak, so scaling the input
//! amplitude shifts every log value by the same constant and the min-max
//! step removes it: the field is loudness invariant.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrogram::Spectrogram;

const BINARY_MAGIC: &[u8; 4] = b"ABHF";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistFieldParams {
    /// Histogram bin count B.
    pub bins: usize,
    /// Patch radius r; the counting neighborhood is (2r+1) x (2r+1).
    pub patch_radius: usize,
    /// Relative log floor: the dB grid is `10 log10(S + epsilon * max(S))`.
    pub epsilon: f64,
}

impl HistFieldParams {
    pub fn new(bins: usize, patch_radius: usize, epsilon: f64) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidHistFieldParams(format!(
                "bin count {bins} must be >= 2"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidHistFieldParams("epsilon must be > 0".into()));
        }
        Ok(HistFieldParams {
            bins,
            patch_radius,
            epsilon,
        })
    }
}

impl Default for HistFieldParams {
    fn default() -> Self {
        HistFieldParams::new(8, 1, 1e-12).expect("default params are valid")
    }
}

/// B x K x T stack of per-position histograms (bin-major storage).
///
/// Invariant: at every `(k, t)` the B values are non-negative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramField {
    values: Vec<f64>,
    bins: usize,
    k_bins: usize,
    frames: usize,
    pub params: HistFieldParams,
    /// Trailing one-hot frames appended by [`HistogramField::padded_to`].
    pub padded_frames: usize,
}

impl HistogramField {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn k_bins(&self) -> usize {
        self.k_bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Flat `[b][k][t]` storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, b: usize, k: usize, t: usize) -> f64 {
        self.values[(b * self.k_bins + k) * self.frames + t]
    }

    /// One K x T plane for histogram bin `b`.
    pub fn plane(&self, b: usize) -> &[f64] {
        let stride = self.k_bins * self.frames;
        &self.values[b * stride..(b + 1) * stride]
    }

    /// Owned B-bin histogram at one position.
    pub fn histogram_at(&self, k: usize, t: usize) -> Vec<f64> {
        (0..self.bins).map(|b| self.value(b, k, t)).collect()
    }

    /// Elementwise square roots, same layout.
    pub fn sqrt_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.sqrt()).collect()
    }

    /// Copy extended in time to at least `min_frames` with one-hot bin-0
    /// histograms; the pad count is recorded in `padded_frames`.
    pub fn padded_to(&self, min_frames: usize) -> HistogramField {
        if self.frames >= min_frames {
            return self.clone();
        }
        let pad = min_frames - self.frames;
        let mut out = HistogramField {
            values: vec![0.0; self.bins * self.k_bins * min_frames],
            bins: self.bins,
            k_bins: self.k_bins,
            frames: min_frames,
            params: self.params,
            padded_frames: self.padded_frames + pad,
        };
        for b in 0..self.bins {
            for k in 0..self.k_bins {
                let src = &self.values[(b * self.k_bins + k) * self.frames..][..self.frames];
                let dst_base = (b * out.k_bins + k) * out.frames;
                out.values[dst_base..dst_base + self.frames].copy_from_slice(src);
                if b == 0 {
                    for t in self.frames..min_frames {
                        out.values[dst_base + t] = 1.0;
                    }
                }
            }
        }
        out
    }

    /// Window-sized sub-field at `(k0, t0)`.
    pub fn crop(&self, k0: usize, t0: usize, k_len: usize, t_len: usize) -> HistogramField {
        assert!(k0 + k_len <= self.k_bins && t0 + t_len <= self.frames);
        let mut values = Vec::with_capacity(self.bins * k_len * t_len);
        for b in 0..self.bins {
            for k in k0..k0 + k_len {
                let base = (b * self.k_bins + k) * self.frames + t0;
                values.extend_from_slice(&self.values[base..base + t_len]);
            }
        }
        HistogramField {
            values,
            bins: self.bins,
            k_bins: k_len,
            frames: t_len,
            params: self.params,
            padded_frames: 0,
        }
    }

    pub fn from_values(
        values: Vec<f64>,
        bins: usize,
        k_bins: usize,
        frames: usize,
        params: HistFieldParams,
    ) -> Result<Self> {
        if values.len() != bins * k_bins * frames {
            return Err(Error::DimensionMismatch {
                expected: bins * k_bins * frames,
                got: values.len(),
            });
        }
        Ok(HistogramField {
            values,
            bins,
            k_bins,
            frames,
            params,
            padded_frames: 0,
        })
    }

    /// Binary dump: magic, B, K, T as u32 LE, then bin-major f64 LE.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        for dim in [self.bins, self.k_bins, self.frames] {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, path: &Path, params: HistFieldParams) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::bad_format(path, "bad histogram field magic"));
        }
        let mut dims = [0usize; 3];
        let mut b4 = [0u8; 4];
        for d in &mut dims {
            r.read_exact(&mut b4).map_err(|e| Error::io(path, e))?;
            *d = u32::from_le_bytes(b4) as usize;
        }
        let mut values = vec![0.0f64; dims[0] * dims[1] * dims[2]];
        let mut b8 = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut b8).map_err(|e| Error::io(path, e))?;
            *v = f64::from_le_bytes(b8);
        }
        HistogramField::from_values(values, dims[0], dims[1], dims[2], params)
    }

    /// Debug dump of one bin plane in the spectrogram binary format.
    pub fn write_plane_binary<W: Write>(&self, b: usize, mut w: W) -> std::io::Result<()> {
        w.write_all(b"ABSG")?;
        w.write_all(&(self.k_bins as u32).to_le_bytes())?;
        w.write_all(&(self.frames as u32).to_le_bytes())?;
        for v in self.plane(b) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Quantization labels for a spectrogram (exposed for oracle tests).
pub fn quantize_labels(spec: &Spectrogram, params: &HistFieldParams) -> Vec<usize> {
    let n = spec.values().len();
    let smax = spec.values().iter().fold(0.0f64, |m, &v| m.max(v));
    if smax <= 0.0 {
        return vec![0; n];
    }
    let floor = params.epsilon * smax;
    let log: Vec<f64> = spec
        .values()
        .iter()
        .map(|&v| 10.0 * (v + floor).log10())
        .collect();
    let lmin = log.iter().cloned().fold(f64::INFINITY, f64::min);
    let lmax = log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lmax <= lmin {
        return vec![0; n];
    }
    let b = params.bins;
    log.iter()
        .map(|&l| {
            let norm = (l - lmin) / (lmax - lmin);
            ((norm * b as f64) as usize).min(b - 1)
        })
        .collect()
}

/// Build the histogram field of a spectrogram.
pub fn build_field(spec: &Spectrogram, params: &HistFieldParams) -> HistogramField {
    let k_bins = spec.bins();
    let frames = spec.frames();
    let labels = quantize_labels(spec, params);
    let b = params.bins;
    let r = params.patch_radius as isize;

    let mut values = vec![0.0f64; b * k_bins * frames];
    let mut counts = vec![0u32; b];
    for k in 0..k_bins {
        for t in 0..frames {
            counts.iter_mut().for_each(|c| *c = 0);
            let mut total = 0u32;
            let k_lo = (k as isize - r).max(0) as usize;
            let k_hi = ((k as isize + r) as usize).min(k_bins - 1);
            let t_lo = (t as isize - r).max(0) as usize;
            let t_hi = ((t as isize + r) as usize).min(frames - 1);
            for kk in k_lo..=k_hi {
                for tt in t_lo..=t_hi {
                    counts[labels[kk * frames + tt]] += 1;
                    total += 1;
                }
            }
            let inv = 1.0 / f64::from(total);
            for (bin, &c) in counts.iter().enumerate() {
                if c > 0 {
                    values[(bin * k_bins + k) * frames + t] = f64::from(c) * inv;
                }
            }
        }
    }
    HistogramField {
        values,
        bins: b,
        k_bins,
        frames,
        params: *params,
        padded_frames: 0,
    }
}

/// Bhattacharyya coefficient of two normalized histograms: `sum_b sqrt(h1 h2)`.
pub fn bhattacharyya(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::BinCountMismatch(h1.len(), h2.len()));
    }
    debug_assert!((h1.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    debug_assert!((h2.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    Ok(h1.iter().zip(h2).map(|(a, b)| (a * b).sqrt()).sum())
}
