//! The shared front half of the pipeline: signal -> histogram field.

use crate::audio_io::{decimate, Signal};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::histfield::{build_field, HistogramField};
use crate::spectrogram::compute_spectrogram;

/// Decimate, compute the spectrogram, and build the histogram field, with
/// the field padded in time to at least the detector window.
pub fn signal_field(signal: &Signal, cfg: &PipelineConfig) -> Result<HistogramField> {
    let decimated = decimate(signal, cfg.decimate_factor)?;
    let spec = compute_spectrogram(&decimated, &cfg.spectrogram_params()?)?;
    let field = build_field(&spec, &cfg.hist_params()?);
    Ok(field.padded_to(cfg.detector_t))
}
