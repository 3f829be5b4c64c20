//! Corpus directory layout: per-class WAV files plus a JSON manifest of
//! `{path, class_id, class_name, seed}` entries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_wav, save_wav, CorpusItem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub class_id: usize,
    pub class_name: String,
    pub seed: u64,
}

/// Write clips as 16-bit WAVs under `dir` and a `manifest.json` alongside.
/// The layout and bytes are a pure function of the items.
pub fn save_corpus(items: &[CorpusItem], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(items.len());
    let mut within_class = std::collections::BTreeMap::<usize, usize>::new();
    for item in items {
        let idx = within_class.entry(item.class_id).or_insert(0);
        let rel = format!(
            "class_{:02}_{}/clip_{:03}.wav",
            item.class_id, item.class_name, idx
        );
        *idx += 1;
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        save_wav(&item.signal, &path)?;
        entries.push(ManifestEntry {
            path: rel,
            class_id: item.class_id,
            class_name: item.class_name.clone(),
            seed: item.seed,
        });
    }
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&entries)
        .map_err(|e| Error::bad_format(&manifest_path, e.to_string()))?;
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

/// Load a corpus back from its manifest; WAV paths resolve relative to the
/// manifest's directory.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Vec<CorpusItem>> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::bad_format(manifest_path, e.to_string()))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    entries
        .into_iter()
        .map(|e| {
            Ok(CorpusItem {
                signal: load_wav(base.join(&e.path))?,
                class_id: e.class_id,
                class_name: e.class_name,
                seed: e.seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{default_corpus_specs, synth_corpus};

    #[test]
    fn save_load_round_trip() {
        let mut specs = default_corpus_specs()[..2].to_vec();
        for s in &mut specs {
            s.duration_range_s = (0.05, 0.08);
        }
        let items = synth_corpus(&specs, &[2, 3], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&items, dir.path()).unwrap();

        let back = load_corpus(dir.path().join("manifest.json")).unwrap();
        assert_eq!(back.len(), items.len());
        for (a, b) in items.iter().zip(&back) {
            assert_eq!(a.class_id, b.class_id);
            assert_eq!(a.class_name, b.class_name);
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.signal.sample_rate(), b.signal.sample_rate());
            assert_eq!(a.signal.len(), b.signal.len());
            // 16-bit quantization bound.
            for (x, y) in a.signal.samples().iter().zip(b.signal.samples()) {
                assert!((x - y).abs() <= 1.5 / 32768.0);
            }
        }
    }

    #[test]
    fn byte_identical_across_invocations() {
        let mut specs = default_corpus_specs()[..1].to_vec();
        specs[0].duration_range_s = (0.05, 0.06);
        let items = synth_corpus(&specs, &[2], 9).unwrap();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save_corpus(&items, d1.path()).unwrap();
        save_corpus(&items, d2.path()).unwrap();
        for rel in ["manifest.json", "class_00_tone_burst/clip_000.wav"] {
            let a = std::fs::read(d1.path().join(rel)).unwrap();
            let b = std::fs::read(d2.path().join(rel)).unwrap();
            assert_eq!(a, b, "{rel} not byte-identical");
        }
    }
}
