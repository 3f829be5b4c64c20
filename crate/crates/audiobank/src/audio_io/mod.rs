//! Audio ingest: WAV files, decimation, and the synthetic event corpus.

mod decimate;
mod manifest;
mod synth;
mod wav;

pub use decimate::{decimate, design_anti_alias_fir, fir_magnitude_response, FIR_TAPS};
pub use manifest::{load_corpus, save_corpus, ManifestEntry};
pub use synth::{
    default_corpus_specs, synth_corpus, synth_event, CorpusItem, EventClassSpec, Waveform,
    SYNTH_SAMPLE_RATE,
};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

/// Mono sample sequence with its sample rate.
///
/// Samples are finite and clipped into `[-1, 1]` on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::ZeroSampleRate);
        }
        let mut samples = samples;
        for (i, s) in samples.iter_mut().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteSample(i));
            }
            *s = s.clamp(-1.0, 1.0);
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Amplitude-scaled copy, re-clipped to `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Signal::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }
}
