//! Deterministic synthetic event corpus.
//!
//! Twelve parameterized archetypes with pairwise distinct spectro-temporal
//! structure stand in for a meeting-room event corpus. All content sits
//! below ~2.3 kHz so it survives the default 1/4 decimation filter.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Signal;
use crate::error::{Error, Result};

pub const SYNTH_SAMPLE_RATE: u32 = 44100;

/// Spectro-temporal shape of one event class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Waveform {
    /// Single sinusoid at the base frequency.
    Tone,
    /// Base frequency plus `harmonics` overtones at 1/h amplitude.
    HarmonicStack { harmonics: u32 },
    /// Linear frequency ramp from base to `end_hz`.
    Chirp { end_hz: f64 },
    /// White noise across the burst.
    WhiteNoise,
    /// Periodic short impulses.
    ClickTrain { rate_hz: f64, click_ms: f64 },
    /// Amplitude-modulated tone.
    AmTone { rate_hz: f64, depth: f64 },
    /// Sinusoidally frequency-modulated tone.
    FmWarble { rate_hz: f64, deviation_hz: f64 },
    /// Random-phase sinusoid comb confined to `[base, base + bandwidth_hz]`.
    BandNoise { bandwidth_hz: f64, partials: u32 },
    /// Tone with an exponential decay (struck object).
    DecayTone { tau_fraction: f64 },
    /// Two simultaneous tones (base and `second_hz`).
    DualTone { second_hz: f64 },
}

/// Synthesis parameters for one event class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventClassSpec {
    pub class_id: usize,
    pub name: String,
    pub base_freq_hz: f64,
    pub waveform: Waveform,
    /// Event length is drawn uniformly from this range (seconds).
    pub duration_range_s: (f64, f64),
    /// 0 = clean, 1 = noise only.
    pub noise_mix: f64,
    /// Relative pitch jitter, e.g. 0.03 draws the base in +/-3%.
    pub freq_jitter: f64,
    /// Peak amplitude is drawn from `[peak * (1 - amp_jitter), peak]`.
    pub amp_jitter: f64,
}

impl EventClassSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        class_id: usize,
        name: impl Into<String>,
        base_freq_hz: f64,
        waveform: Waveform,
        duration_range_s: (f64, f64),
        noise_mix: f64,
        freq_jitter: f64,
        amp_jitter: f64,
    ) -> Result<Self> {
        let spec = EventClassSpec {
            class_id,
            name: name.into(),
            base_freq_hz,
            waveform,
            duration_range_s,
            noise_mix,
            freq_jitter,
            amp_jitter,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.duration_range_s;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidEventSpec(format!(
                "duration range ({lo}, {hi}) must be positive and ordered"
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_mix) {
            return Err(Error::InvalidEventSpec("noise_mix outside [0,1]".into()));
        }
        if !(0.0..1.0).contains(&self.freq_jitter) || !(0.0..1.0).contains(&self.amp_jitter) {
            return Err(Error::InvalidEventSpec("jitter outside [0,1)".into()));
        }
        if self.base_freq_hz <= 0.0 {
            return Err(Error::InvalidEventSpec("base frequency must be > 0".into()));
        }
        Ok(())
    }
}

/// One labeled corpus entry.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub signal: Signal,
    pub class_id: usize,
    pub class_name: String,
    pub seed: u64,
}

/// Render one event. Identical `(spec, seed)` pairs give bit-identical output.
pub fn synth_event(spec: &EventClassSpec, seed: u64) -> Signal {
    debug_assert!(spec.validate().is_ok());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = f64::from(SYNTH_SAMPLE_RATE);

    let (dur_lo, dur_hi) = spec.duration_range_s;
    let duration = draw(&mut rng, dur_lo, dur_hi);
    let freq = spec.base_freq_hz * (1.0 + spec.freq_jitter * (2.0 * rng.random::<f64>() - 1.0));
    let peak = 0.85 * (1.0 - spec.amp_jitter * rng.random::<f64>());
    let n = (duration * rate).round().max(1.0) as usize;

    let mut tonal = vec![0.0f64; n];
    render_waveform(&mut tonal, spec.waveform, freq, rate, &mut rng);

    // Noise drawn unconditionally to keep the stream layout fixed per class.
    let noise: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();

    let mix = spec.noise_mix;
    let mut samples: Vec<f64> = tonal
        .iter()
        .zip(&noise)
        .map(|(t, w)| (1.0 - mix) * t + mix * w)
        .collect();

    apply_envelope(&mut samples, rate);

    // Normalize the peak to the drawn amplitude, so |sample| <= 1 exactly.
    let max = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if max > 0.0 {
        let g = peak / max;
        for s in &mut samples {
            *s *= g;
        }
    }

    // Exact-silence margins, as an isolated recording would have. They pin
    // the quietest spectrogram cells to the log floor, so the per-utterance
    // quantization grid is the same for every clip of a class.
    let margin = (0.04 * rate) as usize;
    let mut framed = vec![0.0; margin];
    framed.extend_from_slice(&samples);
    framed.extend(std::iter::repeat_n(0.0, margin));
    Signal::new(framed, SYNTH_SAMPLE_RATE).expect("synthesis stays finite and in range")
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn render_waveform(
    out: &mut [f64],
    waveform: Waveform,
    freq: f64,
    rate: f64,
    rng: &mut ChaCha8Rng,
) {
    use std::f64::consts::PI;
    let n = out.len();
    let two_pi = 2.0 * PI;
    match waveform {
        Waveform::Tone => {
            let w = two_pi * freq / rate;
            for (i, s) in out.iter_mut().enumerate() {
                *s = (w * i as f64).sin();
            }
        }
        Waveform::HarmonicStack { harmonics } => {
            for h in 1..=harmonics.max(1) {
                let w = two_pi * freq * f64::from(h) / rate;
                let a = 1.0 / f64::from(h);
                for (i, s) in out.iter_mut().enumerate() {
                    *s += a * (w * i as f64).sin();
                }
            }
        }
        Waveform::Chirp { end_hz } => {
            // Phase integral of a linear sweep freq -> end_hz over the event.
            let span = end_hz - freq;
            for (i, s) in out.iter_mut().enumerate() {
                let t = i as f64 / rate;
                let total = n as f64 / rate;
                let phase = two_pi * (freq * t + 0.5 * span * t * t / total);
                *s = phase.sin();
            }
        }
        Waveform::WhiteNoise => {
            for s in out.iter_mut() {
                *s = 2.0 * rng.random::<f64>() - 1.0;
            }
        }
        Waveform::ClickTrain { rate_hz, click_ms } => {
            let period = (rate / rate_hz).max(1.0) as usize;
            let width = ((click_ms / 1000.0) * rate).max(1.0) as usize;
            let w = two_pi * freq / rate;
            for (i, s) in out.iter_mut().enumerate() {
                if i % period < width {
                    *s = (w * i as f64).sin() + 0.5;
                }
            }
        }
        Waveform::AmTone { rate_hz, depth } => {
            let wc = two_pi * freq / rate;
            let wm = two_pi * rate_hz / rate;
            for (i, s) in out.iter_mut().enumerate() {
                let t = i as f64;
                *s = (1.0 - depth * 0.5 * (1.0 - (wm * t).cos())) * (wc * t).sin();
            }
        }
        Waveform::FmWarble {
            rate_hz,
            deviation_hz,
        } => {
            let wm = two_pi * rate_hz / rate;
            for (i, s) in out.iter_mut().enumerate() {
                let t = i as f64;
                let phase =
                    two_pi * freq / rate * t + deviation_hz / rate_hz * (1.0 - (wm * t).cos());
                *s = phase.sin();
            }
        }
        Waveform::BandNoise {
            bandwidth_hz,
            partials,
        } => {
            let p = partials.max(4);
            for _ in 0..p {
                let f = freq + bandwidth_hz * rng.random::<f64>();
                let phase0 = two_pi * rng.random::<f64>();
                let w = two_pi * f / rate;
                for (i, s) in out.iter_mut().enumerate() {
                    *s += (w * i as f64 + phase0).sin();
                }
            }
        }
        Waveform::DecayTone { tau_fraction } => {
            let tau = (n as f64 * tau_fraction).max(1.0);
            let w = two_pi * freq / rate;
            for (i, s) in out.iter_mut().enumerate() {
                *s = (-(i as f64) / tau).exp() * (w * i as f64).sin();
            }
        }
        Waveform::DualTone { second_hz } => {
            let w1 = two_pi * freq / rate;
            let w2 = two_pi * second_hz / rate;
            for (i, s) in out.iter_mut().enumerate() {
                let t = i as f64;
                *s = 0.5 * ((w1 * t).sin() + (w2 * t).sin());
            }
        }
    }
}

/// Raised-cosine attack/release over 5% of the event at each end.
fn apply_envelope(samples: &mut [f64], _rate: f64) {
    let n = samples.len();
    let ramp = (n / 20).max(1);
    for i in 0..ramp.min(n) {
        let g = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / ramp as f64).cos());
        samples[i] *= g;
        samples[n - 1 - i] *= g;
    }
}

/// Render a labeled corpus: `counts[i]` events from `specs[i]`, class-major,
/// with per-item seeds `master_seed + flat_index`.
pub fn synth_corpus(
    specs: &[EventClassSpec],
    counts: &[usize],
    master_seed: u64,
) -> Result<Vec<CorpusItem>> {
    if specs.len() != counts.len() {
        return Err(Error::CorpusShapeMismatch {
            specs: specs.len(),
            counts: counts.len(),
        });
    }
    for (spec, &count) in specs.iter().zip(counts) {
        spec.validate()?;
        if count == 0 {
            return Err(Error::InvalidEventSpec(format!(
                "class {} requested zero samples",
                spec.class_id
            )));
        }
    }
    let mut items = Vec::with_capacity(counts.iter().sum());
    let mut flat = 0u64;
    for (spec, &count) in specs.iter().zip(counts) {
        for _ in 0..count {
            let seed = master_seed.wrapping_add(flat);
            items.push(CorpusItem {
                signal: synth_event(spec, seed),
                class_id: spec.class_id,
                class_name: spec.name.clone(),
                seed,
            });
            flat += 1;
        }
    }
    Ok(items)
}

/// The twelve default archetypes. Frequencies stay under ~2.3 kHz so the
/// default decimation (cutoff ~2.48 kHz at 11.025 kHz) passes them.
pub fn default_corpus_specs() -> Vec<EventClassSpec> {
    let mk = |id, name, base, wf, noise, fj| {
        EventClassSpec::new(id, name, base, wf, (1.4, 2.2), noise, fj, 0.2)
            .expect("default spec is valid")
    };
    vec![
        mk(0, "tone_burst", 440.0, Waveform::Tone, 0.02, 0.01),
        mk(
            1,
            "harmonic_stack",
            330.0,
            Waveform::HarmonicStack { harmonics: 6 },
            0.02,
            0.03,
        ),
        mk(
            2,
            "chirp_up",
            250.0,
            Waveform::Chirp { end_hz: 2000.0 },
            0.02,
            0.04,
        ),
        mk(
            3,
            "chirp_down",
            2200.0,
            Waveform::Chirp { end_hz: 280.0 },
            0.02,
            0.04,
        ),
        mk(4, "noise_burst", 500.0, Waveform::WhiteNoise, 1.0, 0.0),
        mk(
            5,
            "click_train",
            1100.0,
            Waveform::ClickTrain {
                rate_hz: 18.0,
                click_ms: 4.0,
            },
            0.05,
            0.05,
        ),
        mk(
            6,
            "am_tone",
            750.0,
            Waveform::AmTone {
                rate_hz: 7.0,
                depth: 0.95,
            },
            0.02,
            0.03,
        ),
        mk(
            7,
            "fm_warble",
            1000.0,
            Waveform::FmWarble {
                rate_hz: 4.5,
                deviation_hz: 450.0,
            },
            0.02,
            0.03,
        ),
        mk(
            8,
            "band_noise",
            1400.0,
            Waveform::BandNoise {
                bandwidth_hz: 700.0,
                partials: 160,
            },
            0.1,
            0.02,
        ),
        mk(
            9,
            "decay_tone",
            620.0,
            Waveform::DecayTone { tau_fraction: 0.18 },
            0.02,
            0.03,
        ),
        mk(
            10,
            "dual_tone",
            520.0,
            Waveform::DualTone { second_hz: 1850.0 },
            0.02,
            0.02,
        ),
        mk(11, "tone_noise_mix", 1650.0, Waveform::Tone, 0.45, 0.03),
    ]
}
