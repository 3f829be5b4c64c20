//! Detector bank: distinctive spectrogram-field crops selected per class.
//!
//! For each class, window-sized crops of the training fields are clustered
//! by k-means and the cluster medoids become the class's detectors. The
//! bank is ordered class-major and its size is `N_c * N_d`.

mod kmeans;

pub use kmeans::kmeans_medoids;

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::Signal;
use crate::config::{PipelineConfig, PipelineFingerprint};
use crate::error::{Error, Result};
use crate::histfield::HistogramField;
use crate::pipeline::signal_field;
use crate::seeds::derive_seed;

/// One window-sized crop with provenance.
#[derive(Debug, Clone)]
pub struct CandidateCrop {
    pub class_id: usize,
    pub clip_id: usize,
    pub freq_offset: usize,
    pub time_offset: usize,
    pub field: HistogramField,
}

/// A detector: a histogram-field crop with its square roots precomputed.
#[derive(Debug, Clone)]
pub struct Detector {
    /// Position in the bank (class-major).
    pub id: usize,
    pub class_id: usize,
    pub field: HistogramField,
    sqrt_field: Vec<f64>,
    pub source_clip: usize,
    pub freq_offset: usize,
    pub time_offset: usize,
}

impl Detector {
    fn from_candidate(id: usize, c: &CandidateCrop) -> Detector {
        Detector {
            id,
            class_id: c.class_id,
            sqrt_field: c.field.sqrt_values(),
            field: c.field.clone(),
            source_clip: c.clip_id,
            freq_offset: c.freq_offset,
            time_offset: c.time_offset,
        }
    }

    /// Elementwise square roots of the field, `[b][k][t]` layout.
    pub fn sqrt_field(&self) -> &[f64] {
        &self.sqrt_field
    }

    /// Detector from a bare field with no provenance, for ad-hoc matching.
    pub fn from_field(id: usize, class_id: usize, field: HistogramField) -> Detector {
        Detector {
            id,
            class_id,
            sqrt_field: field.sqrt_values(),
            field,
            source_clip: 0,
            freq_offset: 0,
            time_offset: 0,
        }
    }
}

/// All window-sized sub-fields of the given class's fields at stride
/// offsets. Fields must already be at least window-sized in time.
pub fn crop_candidates(
    fields: &[(usize, HistogramField)],
    window: (usize, usize),
    stride: (usize, usize),
    class_id: usize,
) -> Result<Vec<CandidateCrop>> {
    let (wk, wt) = window;
    let (sk, st) = stride;
    assert!(sk > 0 && st > 0, "strides must be positive");
    let mut out = Vec::new();
    for (clip_id, field) in fields {
        if field.k_bins() < wk || field.frames() < wt {
            continue;
        }
        let mut k0 = 0;
        while k0 + wk <= field.k_bins() {
            let mut t0 = 0;
            while t0 + wt <= field.frames() {
                out.push(CandidateCrop {
                    class_id,
                    clip_id: *clip_id,
                    freq_offset: k0,
                    time_offset: t0,
                    field: field.crop(k0, t0, wk, wt),
                });
                t0 += st;
            }
            k0 += sk;
        }
    }
    if out.is_empty() {
        return Err(Error::NoCandidates {
            class_id,
            window_k: wk,
            window_t: wt,
        });
    }
    Ok(out)
}

/// Select `n_d` detectors from candidates by k-means medoids. Detector ids
/// are assigned 0..n_d in candidate order of the chosen medoids.
pub fn kmeans_select(
    candidates: &[CandidateCrop],
    n_d: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<Detector>> {
    let flat: Vec<&[f64]> = candidates.iter().map(|c| c.field.values()).collect();
    let medoids = kmeans_medoids(&flat, n_d, seed, max_iter, tol)?;
    Ok(medoids
        .iter()
        .enumerate()
        .map(|(i, &m)| Detector::from_candidate(i, &candidates[m]))
        .collect())
}

/// The assembled bank.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    detectors: Vec<Detector>,
    n_classes: usize,
    per_class: usize,
    window: (usize, usize),
    pub fingerprint: PipelineFingerprint,
}

impl DetectorBank {
    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    pub fn len(&self) -> usize {
        self.detectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    /// Detector window `(K_d, T_d)`.
    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    /// Clip ids whose crops entered the bank; the evaluation split keeps
    /// these out of the test set.
    pub fn source_clips(&self) -> BTreeSet<usize> {
        self.detectors.iter().map(|d| d.source_clip).collect()
    }

    /// Feature vector length this bank produces.
    pub fn feature_len(&self) -> usize {
        self.detectors.len() * crate::featurize::POOL_VALUES
    }

    /// Assemble a bank from prebuilt detectors. Count and window shapes are
    /// checked against `n_classes * per_class`.
    pub fn from_parts(
        detectors: Vec<Detector>,
        n_classes: usize,
        per_class: usize,
        window: (usize, usize),
        fingerprint: PipelineFingerprint,
    ) -> Result<Self> {
        if detectors.len() != n_classes * per_class {
            return Err(Error::DimensionMismatch {
                expected: n_classes * per_class,
                got: detectors.len(),
            });
        }
        for d in &detectors {
            if d.field.k_bins() != window.0 || d.field.frames() != window.1 {
                return Err(Error::DetectorTooLarge {
                    det_k: d.field.k_bins(),
                    det_t: d.field.frames(),
                    sig_k: window.0,
                    sig_t: window.1,
                });
            }
        }
        Ok(DetectorBank {
            detectors,
            n_classes,
            per_class,
            window,
            fingerprint,
        })
    }
}

/// Build a bank from labeled training clips: per class, field -> crops ->
/// k-means medoids, concatenated class-major.
///
/// Detectors are anchored at frequency offset 0; the 2-D match slides them
/// across frequency at match time.
pub fn build_bank(
    clips: &[(usize, usize, &Signal)],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<DetectorBank> {
    cfg.validate()?;
    if clips.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n_classes = clips.iter().map(|(_, c, _)| c + 1).max().unwrap();
    for class in 0..n_classes {
        if !clips.iter().any(|(_, c, _)| *c == class) {
            return Err(Error::ClassTooSmall {
                class_id: class,
                count: 0,
            });
        }
    }

    let window = (cfg.detector_k, cfg.detector_t);
    let per_class_detectors: Vec<Result<Vec<Detector>>> = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let mut fields = Vec::new();
            for (clip_id, class_id, signal) in clips {
                if *class_id != class {
                    continue;
                }
                fields.push((*clip_id, signal_field(signal, cfg)?));
            }
            // Frequency anchored at offset 0: stride_k spans the whole axis.
            let stride_k = fields
                .iter()
                .map(|(_, f)| f.k_bins())
                .max()
                .unwrap_or(window.0)
                .max(window.0);
            let candidates =
                crop_candidates(&fields, window, (stride_k, cfg.crop_stride_t), class)?;
            kmeans_select(
                &candidates,
                cfg.detectors_per_class,
                derive_seed(seed, "bank-class", class as u64),
                cfg.kmeans_max_iter,
                cfg.kmeans_tol,
            )
        })
        .collect();

    let mut detectors = Vec::with_capacity(n_classes * cfg.detectors_per_class);
    for class_result in per_class_detectors {
        for mut d in class_result? {
            d.id = detectors.len();
            detectors.push(d);
        }
    }
    Ok(DetectorBank {
        detectors,
        n_classes,
        per_class: cfg.detectors_per_class,
        window,
        fingerprint: cfg.fingerprint(),
    })
}

/// Build a bank of `total` detectors. A total below the class count covers
/// only the first `total` classes with one detector each (the remaining
/// classes stay unexpressed by the feature vector); otherwise the total
/// must divide evenly into per-class detectors.
pub fn build_bank_sized(
    clips: &[(usize, usize, &Signal)],
    cfg: &PipelineConfig,
    total: usize,
    seed: u64,
) -> Result<DetectorBank> {
    if total == 0 {
        return Err(Error::InvalidConfig("bank size must be >= 1".into()));
    }
    let n_classes = clips.iter().map(|(_, c, _)| c + 1).max().unwrap_or(0);
    if total < n_classes {
        let subset: Vec<(usize, usize, &Signal)> = clips
            .iter()
            .filter(|(_, c, _)| *c < total)
            .copied()
            .collect();
        let mut sub_cfg = cfg.clone();
        sub_cfg.detectors_per_class = 1;
        build_bank(&subset, &sub_cfg, seed)
    } else {
        if !total.is_multiple_of(n_classes) {
            return Err(Error::InvalidConfig(format!(
                "bank size {total} is not a multiple of the class count {n_classes}"
            )));
        }
        let mut sub_cfg = cfg.clone();
        sub_cfg.detectors_per_class = total / n_classes;
        build_bank(clips, &sub_cfg, seed)
    }
}

#[derive(Serialize, Deserialize)]
struct BankManifest {
    n_classes: usize,
    per_class: usize,
    window_k: usize,
    window_t: usize,
    fingerprint: PipelineFingerprint,
    detectors: Vec<DetectorEntry>,
}

#[derive(Serialize, Deserialize)]
struct DetectorEntry {
    id: usize,
    class_id: usize,
    source_clip: usize,
    freq_offset: usize,
    time_offset: usize,
    file: String,
}

impl DetectorBank {
    /// Save as a directory: `manifest.json` plus one binary field per
    /// detector. The round trip is lossless.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.detectors.len());
        for d in &self.detectors {
            let file = format!("det_{:04}.abhf", d.id);
            let path = dir.join(&file);
            let mut buf = Vec::new();
            d.field
                .write_binary(&mut buf)
                .map_err(|e| Error::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            entries.push(DetectorEntry {
                id: d.id,
                class_id: d.class_id,
                source_clip: d.source_clip,
                freq_offset: d.freq_offset,
                time_offset: d.time_offset,
                file,
            });
        }
        let manifest = BankManifest {
            n_classes: self.n_classes,
            per_class: self.per_class,
            window_k: self.window.0,
            window_t: self.window.1,
            fingerprint: self.fingerprint.clone(),
            detectors: entries,
        };
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::bad_format(&path, e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: BankManifest = serde_json::from_str(&text)
            .map_err(|e| Error::bad_format(&manifest_path, e.to_string()))?;

        let hist_params = crate::histfield::HistFieldParams::new(
            manifest.fingerprint.hist_bins,
            manifest.fingerprint.patch_radius,
            manifest.fingerprint.epsilon,
        )?;
        let mut detectors = Vec::with_capacity(manifest.detectors.len());
        for e in &manifest.detectors {
            let path = dir.join(&e.file);
            let bytes = std::fs::read(&path).map_err(|err| Error::io(&path, err))?;
            let field = HistogramField::read_binary(bytes.as_slice(), &path, hist_params)?;
            if field.k_bins() != manifest.window_k || field.frames() != manifest.window_t {
                return Err(Error::bad_format(
                    &path,
                    format!(
                        "detector field {}x{} does not match bank window {}x{}",
                        field.k_bins(),
                        field.frames(),
                        manifest.window_k,
                        manifest.window_t
                    ),
                ));
            }
            detectors.push(Detector {
                id: e.id,
                class_id: e.class_id,
                sqrt_field: field.sqrt_values(),
                field,
                source_clip: e.source_clip,
                freq_offset: e.freq_offset,
                time_offset: e.time_offset,
            });
        }
        let expected = manifest.n_classes * manifest.per_class;
        if detectors.len() != expected {
            return Err(Error::bad_format(
                &manifest_path,
                format!("{} detectors, expected {}", detectors.len(), expected),
            ));
        }
        Ok(DetectorBank {
            detectors,
            n_classes: manifest.n_classes,
            per_class: manifest.per_class,
            window: (manifest.window_k, manifest.window_t),
            fingerprint: manifest.fingerprint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{default_corpus_specs, synth_corpus};
    use crate::histfield::{build_field, HistFieldParams};
    use crate::spectrogram::{compute_spectrogram, SpectrogramParams};

    fn tiny_cfg() -> PipelineConfig {
        PipelineConfig {
            detector_k: 48,
            detector_t: 24,
            crop_stride_t: 4,
            detectors_per_class: 2,
            ..PipelineConfig::default()
        }
    }

    fn short_corpus(classes: usize, per_class: usize) -> Vec<crate::audio_io::CorpusItem> {
        let specs: Vec<_> = default_corpus_specs()
            .into_iter()
            .take(classes)
            .map(|mut s| {
                s.duration_range_s = (0.45, 0.55);
                s
            })
            .collect();
        synth_corpus(&specs, &vec![per_class; classes], 11).unwrap()
    }

    fn field_for_test(len_frames: usize, k_bins: usize, seed: u64) -> HistogramField {
        // Arbitrary but valid field from a random spectrogram.
        let mut rng = crate::seeds::rng_for(seed, "bank-test", 0);
        use rand::Rng;
        let n = 2 * (k_bins - 1);
        let params = SpectrogramParams::new(n, n / 2).unwrap();
        let len = n + (len_frames - 1) * (n / 2);
        let sig = crate::audio_io::Signal::new(
            (0..len).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
            44100,
        )
        .unwrap();
        let spec = compute_spectrogram(&sig, &params).unwrap();
        build_field(&spec, &HistFieldParams::default())
    }

    #[test]
    fn crop_offset_arithmetic() {
        let f = field_for_test(40, 64, 1);
        assert_eq!((f.k_bins(), f.frames()), (64, 40));
        let c = crop_candidates(&[(0, f)], (64, 32), (64, 8), 0).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].time_offset, c[1].time_offset), (0, 8));
        assert!(c.iter().all(|x| x.freq_offset == 0));
    }

    #[test]
    fn window_equal_to_field_single_candidate() {
        let f = field_for_test(32, 64, 2);
        let c = crop_candidates(&[(7, f)], (64, 32), (64, 8), 3).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].clip_id, 7);
        assert_eq!(c[0].class_id, 3);
    }

    #[test]
    fn ten_clips_thirty_candidates() {
        let fields: Vec<(usize, HistogramField)> = (0..10)
            .map(|i| (i, field_for_test(64, 64, 10 + i as u64)))
            .collect();
        let c = crop_candidates(&fields, (64, 32), (64, 16), 0).unwrap();
        assert_eq!(c.len(), 30);
    }

    #[test]
    fn window_larger_than_all_clips_errors() {
        let f = field_for_test(16, 64, 3);
        assert!(matches!(
            crop_candidates(&[(0, f)], (64, 32), (64, 8), 5),
            Err(Error::NoCandidates { class_id: 5, .. })
        ));
    }

    #[test]
    fn select_all_candidates_returns_candidates() {
        let f = field_for_test(64, 32, 4);
        let candidates = crop_candidates(&[(0, f)], (32, 16), (32, 16), 0).unwrap();
        let n = candidates.len();
        let detectors = kmeans_select(&candidates, n, 123, 100, 1e-6).unwrap();
        assert_eq!(detectors.len(), n);
        for (d, c) in detectors.iter().zip(&candidates) {
            assert_eq!(d.field.values(), c.field.values());
            assert_eq!(d.time_offset, c.time_offset);
        }
    }

    #[test]
    fn single_window_sized_clip_is_the_detector() {
        let f = field_for_test(24, 48, 5);
        let candidates = crop_candidates(&[(0, f.clone())], (48, 24), (48, 8), 0).unwrap();
        assert_eq!(candidates.len(), 1);
        let detectors = kmeans_select(&candidates, 1, 0, 100, 1e-6).unwrap();
        assert_eq!(detectors[0].field.values(), f.values());
        // sqrt_field is elementwise sqrt of the field.
        for (s, v) in detectors[0].sqrt_field().iter().zip(f.values()) {
            assert!((s * s - v).abs() < 1e-12);
        }
    }

    #[test]
    fn bank_size_identity_and_order() {
        let corpus = short_corpus(3, 3);
        let clips: Vec<(usize, usize, &crate::audio_io::Signal)> = corpus
            .iter()
            .enumerate()
            .map(|(i, item)| (i, item.class_id, &item.signal))
            .collect();
        let cfg = tiny_cfg();
        let bank = build_bank(&clips, &cfg, 42).unwrap();
        assert_eq!(bank.len(), 3 * 2);
        assert_eq!(bank.n_classes(), 3);
        assert_eq!(bank.per_class(), 2);
        let ids: Vec<usize> = bank.detectors().iter().map(|d| d.id).collect();
        assert_eq!(ids, (0..6).collect::<Vec<_>>());
        let classes: Vec<usize> = bank.detectors().iter().map(|d| d.class_id).collect();
        assert_eq!(classes, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn one_detector_per_class_bank() {
        let corpus = short_corpus(4, 2);
        let clips: Vec<_> = corpus
            .iter()
            .enumerate()
            .map(|(i, item)| (i, item.class_id, &item.signal))
            .collect();
        let mut cfg = tiny_cfg();
        cfg.detectors_per_class = 1;
        let bank = build_bank(&clips, &cfg, 9).unwrap();
        assert_eq!(bank.len(), 4);
    }

    #[test]
    fn bank_determinism_and_lossless_round_trip() {
        let corpus = short_corpus(2, 3);
        let clips: Vec<_> = corpus
            .iter()
            .enumerate()
            .map(|(i, item)| (i, item.class_id, &item.signal))
            .collect();
        let cfg = tiny_cfg();
        let bank_a = build_bank(&clips, &cfg, 7).unwrap();
        let bank_b = build_bank(&clips, &cfg, 7).unwrap();

        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        bank_a.save(dir_a.path()).unwrap();
        bank_b.save(dir_b.path()).unwrap();
        let manifest_a = std::fs::read(dir_a.path().join("manifest.json")).unwrap();
        let manifest_b = std::fs::read(dir_b.path().join("manifest.json")).unwrap();
        assert_eq!(manifest_a, manifest_b);

        let loaded = DetectorBank::load(dir_a.path()).unwrap();
        assert_eq!(loaded.len(), bank_a.len());
        assert_eq!(loaded.fingerprint, bank_a.fingerprint);
        for (l, o) in loaded.detectors().iter().zip(bank_a.detectors()) {
            assert_eq!(l.field.values(), o.field.values());
            assert_eq!(l.source_clip, o.source_clip);
            assert_eq!(l.time_offset, o.time_offset);
        }
        // Byte-identical re-save.
        let dir_c = tempfile::tempdir().unwrap();
        loaded.save(dir_c.path()).unwrap();
        for entry in std::fs::read_dir(dir_a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let c = std::fs::read(dir_c.path().join(&name)).unwrap();
            assert_eq!(a, c, "{name:?} differs after round trip");
        }
    }

    #[test]
    fn missing_class_rejected() {
        let corpus = short_corpus(3, 2);
        // Drop class 1 entirely.
        let clips: Vec<_> = corpus
            .iter()
            .enumerate()
            .filter(|(_, item)| item.class_id != 1)
            .map(|(i, item)| (i, item.class_id, &item.signal))
            .collect();
        assert!(matches!(
            build_bank(&clips, &tiny_cfg(), 1),
            Err(Error::ClassTooSmall { class_id: 1, .. })
        ));
    }
}
