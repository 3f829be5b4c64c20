//! Detector/signal matching: the global Bhattacharyya match map.
//!
//! At every valid placement of a detector inside a signal field the
//! per-position Bhattacharyya coefficients are summed across the detector
//! support and normalized by the detector area, giving a map in [0, 1].
//! Two routes compute it: a direct triple loop and the convolution-theorem
//! fast path (per-bin 2-D FFT correlations of the square-root planes).

mod fft2d;

pub use fft2d::{next_fast_len, Fft2d};

use std::io::Write;

use rustfft::num_complex::Complex;

use crate::bank::{Detector, DetectorBank};
use crate::error::{Error, Result};
use crate::histfield::HistogramField;

/// Grid of per-placement match scores, row-major (frequency offsets by
/// time offsets).
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMap {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    pub detector_id: usize,
}

impl MatchMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Debug CSV: one row per frequency offset.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{:.9e}", self.value(r, c))?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn output_shape(signal: &HistogramField, det: &Detector) -> Result<(usize, usize)> {
    let (sk, st) = (signal.k_bins(), signal.frames());
    let (dk, dt) = (det.field.k_bins(), det.field.frames());
    if signal.bins() != det.field.bins() {
        return Err(Error::BinCountMismatch(signal.bins(), det.field.bins()));
    }
    if dk > sk || dt > st {
        return Err(Error::DetectorTooLarge {
            det_k: dk,
            det_t: dt,
            sig_k: sk,
            sig_t: st,
        });
    }
    Ok((sk - dk + 1, st - dt + 1))
}

/// Direct evaluation of the match map (the oracle route).
pub fn match_direct(signal: &HistogramField, det: &Detector) -> Result<MatchMap> {
    match_direct_with(signal, det, true)
}

/// Direct evaluation; `normalize` divides by the detector area to keep the
/// map in [0, 1].
pub fn match_direct_with(
    signal: &HistogramField,
    det: &Detector,
    normalize: bool,
) -> Result<MatchMap> {
    let (rows, cols) = output_shape(signal, det)?;
    let (sig_t, det_k, det_t) = (signal.frames(), det.field.k_bins(), det.field.frames());
    let sqrt_signal = signal.sqrt_values();
    let sqrt_det = det.sqrt_field();
    let plane = signal.k_bins() * sig_t;
    let det_plane = det_k * det_t;

    let mut out = vec![0.0f64; rows * cols];
    for b in 0..signal.bins() {
        let s = &sqrt_signal[b * plane..(b + 1) * plane];
        let d = &sqrt_det[b * det_plane..(b + 1) * det_plane];
        for k0 in 0..rows {
            let out_row = &mut out[k0 * cols..(k0 + 1) * cols];
            for dk in 0..det_k {
                let s_row = &s[(k0 + dk) * sig_t..(k0 + dk + 1) * sig_t];
                for dt in 0..det_t {
                    let w = d[dk * det_t + dt];
                    if w == 0.0 {
                        continue;
                    }
                    let shifted = &s_row[dt..dt + cols];
                    for (acc, &v) in out_row.iter_mut().zip(shifted) {
                        *acc += w * v;
                    }
                }
            }
        }
    }
    if normalize {
        let inv = 1.0 / (det_k * det_t) as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(MatchMap {
        values: out,
        rows,
        cols,
        detector_id: det.id,
    })
}

/// FFT sizes and pair-packed forward transforms of a signal's square-root
/// planes, shared across a whole bank. Planes `2j` and `2j+1` ride in one
/// complex transform (`re` and `im`); the bin product sum is recovered via
/// conjugate symmetry, so a B-bin match costs ceil(B/2) transforms a side.
struct SignalSpectra {
    p: usize,
    q: usize,
    packed: Vec<Vec<Complex<f64>>>,
}

/// Zero-padded forward transforms of the `bins` real planes stored in
/// `values` (`[b][k][t]` layout), packed two planes per transform.
fn packed_plane_spectra(
    values: &[f64],
    bins: usize,
    k: usize,
    t: usize,
    p: usize,
    q: usize,
    fft: &mut Fft2d,
) -> Vec<Vec<Complex<f64>>> {
    let plane_len = k * t;
    let mut out = Vec::with_capacity(bins.div_ceil(2));
    let mut b = 0;
    while b < bins {
        let mut buf = vec![Complex::new(0.0, 0.0); p * q];
        let lo = &values[b * plane_len..(b + 1) * plane_len];
        if b + 1 < bins {
            let hi = &values[(b + 1) * plane_len..(b + 2) * plane_len];
            for kk in 0..k {
                for tt in 0..t {
                    buf[kk * q + tt] = Complex::new(lo[kk * t + tt], hi[kk * t + tt]);
                }
            }
        } else {
            for kk in 0..k {
                for tt in 0..t {
                    buf[kk * q + tt] = Complex::new(lo[kk * t + tt], 0.0);
                }
            }
        }
        fft.forward(&mut buf, p, q);
        out.push(buf);
        b += 2;
    }
    out
}

fn signal_spectra(signal: &HistogramField, fft: &mut Fft2d) -> SignalSpectra {
    let (k, t) = (signal.k_bins(), signal.frames());
    let p = next_fast_len(k);
    let q = next_fast_len(t);
    let sqrt_signal = signal.sqrt_values();
    let packed = packed_plane_spectra(&sqrt_signal, signal.bins(), k, t, p, q, fft);
    SignalSpectra { p, q, packed }
}

/// Accumulate `S_2j conj(D_2j) + S_2j+1 conj(D_2j+1)` from one packed
/// signal/kernel transform pair: with `W = Zs .* conj(Zd)`, the sum equals
/// `(W[u] + conj W[-u]) / 2`; the 1/2 is folded into the caller's scale.
fn accumulate_packed_product(
    acc: &mut [Complex<f64>],
    zs: &[Complex<f64>],
    zd: &[Complex<f64>],
    p: usize,
    q: usize,
    w_buf: &mut Vec<Complex<f64>>,
) {
    w_buf.clear();
    w_buf.extend(zs.iter().zip(zd).map(|(s, d)| s * d.conj()));
    for r in 0..p {
        let rm = (p - r) % p;
        for c in 0..q {
            let cm = (q - c) % q;
            acc[r * q + c] += w_buf[r * q + c] + w_buf[rm * q + cm].conj();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn match_one_fft(
    spectra: &SignalSpectra,
    det: &Detector,
    rows: usize,
    cols: usize,
    normalize: bool,
    fft: &mut Fft2d,
    w_buf: &mut Vec<Complex<f64>>,
    acc_buf: &mut Vec<Complex<f64>>,
) -> MatchMap {
    let (p, q) = (spectra.p, spectra.q);
    let (det_k, det_t) = (det.field.k_bins(), det.field.frames());

    let kernel_spectra =
        packed_plane_spectra(det.sqrt_field(), det.field.bins(), det_k, det_t, p, q, fft);

    acc_buf.clear();
    acc_buf.resize(p * q, Complex::new(0.0, 0.0));
    for (zs, zd) in spectra.packed.iter().zip(&kernel_spectra) {
        accumulate_packed_product(acc_buf, zs, zd, p, q, w_buf);
    }
    fft.inverse(acc_buf, p, q);

    // The packed-pair recovery carries a factor 1/2.
    let mut scale = 0.5 / (p * q) as f64;
    if normalize {
        scale /= (det_k * det_t) as f64;
    }
    let mut values = Vec::with_capacity(rows * cols);
    for k0 in 0..rows {
        for t0 in 0..cols {
            values.push(acc_buf[k0 * q + t0].re * scale);
        }
    }
    MatchMap {
        values,
        rows,
        cols,
        detector_id: det.id,
    }
}

/// Convolution-theorem fast path; equal to [`match_direct`] within 1e-6.
pub fn match_fft(signal: &HistogramField, det: &Detector) -> Result<MatchMap> {
    match_fft_with(signal, det, true)
}

pub fn match_fft_with(
    signal: &HistogramField,
    det: &Detector,
    normalize: bool,
) -> Result<MatchMap> {
    let (rows, cols) = output_shape(signal, det)?;
    let mut fft = Fft2d::new();
    let spectra = signal_spectra(signal, &mut fft);
    let mut kernel_buf = Vec::new();
    let mut acc_buf = Vec::new();
    Ok(match_one_fft(
        &spectra,
        det,
        rows,
        cols,
        normalize,
        &mut fft,
        &mut kernel_buf,
        &mut acc_buf,
    ))
}

/// Match every bank detector against one signal field, in bank order. The
/// signal-side transforms are computed once and reused across detectors.
pub fn match_bank(signal: &HistogramField, bank: &DetectorBank) -> Result<Vec<MatchMap>> {
    match_bank_with(signal, bank, bank.fingerprint.normalize_match)
}

pub fn match_bank_with(
    signal: &HistogramField,
    bank: &DetectorBank,
    normalize: bool,
) -> Result<Vec<MatchMap>> {
    if bank.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut shapes = Vec::with_capacity(bank.len());
    for det in bank.detectors() {
        shapes.push(output_shape(signal, det)?);
    }
    let mut fft = Fft2d::new();
    let spectra = signal_spectra(signal, &mut fft);
    let mut kernel_buf = Vec::new();
    let mut acc_buf = Vec::new();
    Ok(bank
        .detectors()
        .iter()
        .zip(shapes)
        .map(|(det, (rows, cols))| {
            match_one_fft(
                &spectra,
                det,
                rows,
                cols,
                normalize,
                &mut fft,
                &mut kernel_buf,
                &mut acc_buf,
            )
        })
        .collect())
}
