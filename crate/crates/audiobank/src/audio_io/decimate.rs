//! Anti-aliased integer-factor decimation.
//!
//! A 63-tap Hamming-windowed sinc low-pass (cutoff 0.45x the new Nyquist)
//! runs over the signal with its group delay compensated, then every
//! `factor`-th sample is kept.

use super::Signal;
use crate::error::{Error, Result};
use crate::spectrogram::hamming;

/// Fixed FIR length; odd so the group delay is an integer number of samples.
pub const FIR_TAPS: usize = 63;

/// Windowed-sinc low-pass taps for `cutoff` in cycles/sample, `0 < cutoff < 0.5`.
pub fn design_anti_alias_fir(cutoff: f64) -> Vec<f64> {
    assert!(cutoff > 0.0 && cutoff < 0.5, "cutoff must be in (0, 1/2)");
    let window = hamming(FIR_TAPS).expect("FIR_TAPS >= 2");
    let mid = (FIR_TAPS - 1) as f64 / 2.0;
    window
        .iter()
        .enumerate()
        .map(|(n, w)| {
            let x = n as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            w * sinc
        })
        .collect()
}

/// Magnitude of the FIR frequency response at `freq` cycles/sample.
pub fn fir_magnitude_response(taps: &[f64], freq: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * freq;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &h) in taps.iter().enumerate() {
        re += h * (omega * n as f64).cos();
        im -= h * (omega * n as f64).sin();
    }
    re.hypot(im)
}

/// Low-pass filter then keep every `factor`-th sample. The filter is applied
/// for `factor == 1` as well; output sample `m` is aligned with input sample
/// `m * factor` (group delay removed, zero padding at the edges).
pub fn decimate(signal: &Signal, factor: u32) -> Result<Signal> {
    if factor == 0 {
        return Err(Error::ZeroDecimationFactor);
    }
    if signal.len() < FIR_TAPS {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            need: FIR_TAPS,
        });
    }
    if !signal.sample_rate().is_multiple_of(factor) {
        return Err(Error::NonDivisibleRate {
            rate: signal.sample_rate(),
            factor,
        });
    }

    let new_rate = signal.sample_rate() / factor;
    // Cutoff as a fraction of the *input* rate: 0.45 * (new Nyquist) / rate.
    let cutoff = 0.45 * 0.5 / f64::from(factor);
    let taps = design_anti_alias_fir(cutoff);
    let delay = (FIR_TAPS - 1) / 2;

    let x = signal.samples();
    let factor = factor as usize;
    let out_len = (x.len() - 1) / factor + 1;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let center = m * factor;
        let mut acc = 0.0;
        for (j, &h) in taps.iter().enumerate() {
            // y[n] = sum_j h[j] * x[n + delay - j], zero outside the signal.
            let idx = center + delay;
            if idx >= j {
                if let Some(&v) = x.get(idx - j) {
                    acc += h * v;
                }
            }
        }
        out.push(acc.clamp(-1.0, 1.0));
    }
    Signal::new(out, new_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Same filter and alignment as `decimate` without the range clamp,
    /// for exact linearity checks against scaled inputs.
    fn filter_decimate_unclamped(x: &[f64], factor: u32) -> Vec<f64> {
        let cutoff = 0.45 * 0.5 / f64::from(factor);
        let taps = design_anti_alias_fir(cutoff);
        let delay = (FIR_TAPS - 1) / 2;
        let factor = factor as usize;
        let out_len = (x.len() - 1) / factor + 1;
        (0..out_len)
            .map(|m| {
                let center = m * factor + delay;
                taps.iter()
                    .enumerate()
                    .filter(|(j, _)| center >= *j && center - j < x.len())
                    .map(|(j, &h)| h * x[center - j])
                    .sum()
            })
            .collect()
    }

    fn sine(freq: f64, rate: u32, len: usize, amp: f64) -> Signal {
        let w = 2.0 * std::f64::consts::PI * freq / f64::from(rate);
        Signal::new((0..len).map(|n| amp * (w * n as f64).sin()).collect(), rate).unwrap()
    }

    #[test]
    fn dc_passthrough() {
        let s = Signal::new(vec![0.5; 2048], 44100).unwrap();
        let d = decimate(&s, 4).unwrap();
        assert_eq!(d.sample_rate(), 11025);
        // Interior samples (away from edge transients) keep the DC level.
        for &v in &d.samples()[32..d.len() - 32] {
            assert!((v - 0.5).abs() < 1e-3, "got {v}");
        }
    }

    #[test]
    fn stopband_attenuation_at_090_new_nyquist() {
        let rate = 44100;
        let factor = 4;
        let freq = 0.9 * f64::from(rate / factor) / 2.0;
        let s = sine(freq, rate, 1 << 14, 0.9);
        let d = decimate(&s, factor).unwrap();

        let body = &d.samples()[64..d.len() - 64];
        let rms_out = (body.iter().map(|v| v * v).sum::<f64>() / body.len() as f64).sqrt();
        let rms_in = 0.9 / 2f64.sqrt();
        let atten_db = 20.0 * (rms_out / rms_in).log10();
        assert!(atten_db <= -30.0, "attenuation {atten_db:.1} dB");

        // Oracle: the FIR response at that frequency predicts the rejection.
        let taps = design_anti_alias_fir(0.45 * 0.5 / f64::from(factor));
        let gain = fir_magnitude_response(&taps, freq / f64::from(rate));
        assert!(20.0 * gain.log10() <= -30.0);
        assert!((rms_out - gain * rms_in).abs() < 0.05 * rms_in.max(rms_out));
    }

    #[test]
    fn factor_one_matches_direct_convolution() {
        let rate = 8000;
        let s = sine(100.0, rate, 1024, 0.8);
        let d = decimate(&s, 1).unwrap();
        assert_eq!(d.len(), s.len());
        assert_eq!(d.sample_rate(), rate);

        // Direct convolution oracle with the same delay compensation.
        let taps = design_anti_alias_fir(0.45 * 0.5);
        let delay = (FIR_TAPS - 1) / 2;
        for n in 0..s.len() {
            let mut acc = 0.0;
            for (j, &h) in taps.iter().enumerate() {
                let idx = n as isize + delay as isize - j as isize;
                if idx >= 0 && (idx as usize) < s.len() {
                    acc += h * s.samples()[idx as usize];
                }
            }
            assert!((d.samples()[n] - acc.clamp(-1.0, 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = sine(100.0, 44100, 1024, 0.5);
        assert!(matches!(decimate(&s, 0), Err(Error::ZeroDecimationFactor)));
        assert!(matches!(
            decimate(&s, 8),
            Err(Error::NonDivisibleRate { .. })
        ));
        let short = Signal::new(vec![0.1; 32], 44100).unwrap();
        assert!(matches!(
            decimate(&short, 4),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn linearity_exact() {
        let s = sine(700.0, 44100, 4096, 0.2);
        let a = 3.5;
        let lhs =
            filter_decimate_unclamped(&s.samples().iter().map(|v| a * v).collect::<Vec<_>>(), 4);
        let rhs: Vec<f64> = filter_decimate_unclamped(s.samples(), 4)
            .iter()
            .map(|v| a * v)
            .collect();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_identity() {
        let s = sine(440.0, 44100, 2048, 0.5);
        let d = decimate(&s, 4).unwrap();
        assert_eq!(d.sample_rate() * 4, s.sample_rate());
        assert_eq!(d.len(), (s.len() - 1) / 4 + 1);
    }
}
