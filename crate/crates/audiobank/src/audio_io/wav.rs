//! RIFF PCM WAV load/save (16-bit, mono or stereo).

use std::path::Path;

use super::Signal;
use crate::error::{Error, Result};

const SCALE: f64 = 1.0 / 32768.0;

/// Load a 16-bit PCM WAV file. Stereo is averaged to mono; samples are
/// scaled to `[-1, 1]` by `1/32768`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let mut reader = match hound::WavReader::open(path) {
        Ok(r) => r,
        Err(hound::Error::IoError(e)) => return Err(Error::io(path, e)),
        Err(e) => {
            return Err(Error::UnsupportedWav {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })
        }
    };
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedWav {
            path: path.to_path_buf(),
            detail: format!(
                "{}-bit {:?} encoding",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedWav {
            path: path.to_path_buf(),
            detail: format!("{} channels", spec.channels),
        });
    }

    let raw: std::result::Result<Vec<i16>, _> = reader.samples::<i16>().collect();
    let raw = raw.map_err(|e| Error::bad_format(path, e.to_string()))?;
    if raw.is_empty() {
        return Err(Error::ZeroLengthAudio(path.to_path_buf()));
    }

    let samples: Vec<f64> = if spec.channels == 1 {
        raw.iter().map(|&v| f64::from(v) * SCALE).collect()
    } else {
        raw.chunks_exact(2)
            .map(|lr| (f64::from(lr[0]) + f64::from(lr[1])) * 0.5 * SCALE)
            .collect()
    };
    if samples.is_empty() {
        return Err(Error::ZeroLengthAudio(path.to_path_buf()));
    }
    Signal::new(samples, spec.sample_rate)
}

/// Write a signal as 16-bit PCM mono. Quantization is `round(s * 32768)`
/// clamped to the i16 range, the exact inverse of the load scaling.
pub fn save_wav(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| Error::bad_format(path, e.to_string()))?;
    for &s in signal.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| Error::bad_format(path, e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::bad_format(path, e.to_string()))?;
    Ok(())
}
