//! Pipeline configuration: one flat bundle of every tunable, loadable from
//! a JSON file with dotted keys and overridable key by key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::RbfForm;
use crate::error::{Error, Result};
use crate::histfield::HistFieldParams;
use crate::spectrogram::SpectrogramParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Knn,
    SvmA,
    SvmO,
}

impl ClassifierKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "svm-a" => Ok(ClassifierKind::SvmA),
            "svm-o" => Ok(ClassifierKind::SvmO),
            other => Err(Error::InvalidConfig(format!(
                "unknown classifier {other:?} (expected knn, svm-a or svm-o)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::SvmA => "svm-a",
            ClassifierKind::SvmO => "svm-o",
        }
    }
}

/// Every tunable of the pipeline. Defaults follow the reference constants
/// where stated (1/4 decimation, 256-point window at 50% overlap, k = 5,
/// C = 150 / sigma = 75 one-vs-all, C = 100 / sigma = 60 one-vs-one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub decimate_factor: u32,
    pub window_len: usize,
    pub step: usize,
    pub hist_bins: usize,
    pub patch_radius: usize,
    pub epsilon: f64,
    pub detector_k: usize,
    pub detector_t: usize,
    pub crop_stride_t: usize,
    pub detectors_per_class: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub normalize_match: bool,
    pub nmf_enabled: bool,
    pub nmf_rank: usize,
    pub nmf_max_iter: usize,
    pub nmf_rel_tol: f64,
    pub classifier: ClassifierKind,
    pub knn_k: usize,
    pub svm_a_c: f64,
    pub svm_a_sigma: f64,
    pub svm_o_c: f64,
    pub svm_o_sigma: f64,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub svm_standardize: bool,
    pub svm_rbf_form: RbfForm,
    pub train_fraction: f64,
    pub runs: usize,
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            decimate_factor: 4,
            window_len: 256,
            step: 128,
            hist_bins: 8,
            patch_radius: 1,
            epsilon: 1e-12,
            detector_k: 64,
            detector_t: 32,
            crop_stride_t: 16,
            detectors_per_class: 4,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-6,
            normalize_match: true,
            nmf_enabled: false,
            nmf_rank: 64,
            nmf_max_iter: 500,
            nmf_rel_tol: 1e-6,
            classifier: ClassifierKind::SvmA,
            knn_k: 5,
            svm_a_c: 150.0,
            svm_a_sigma: 75.0,
            svm_o_c: 100.0,
            svm_o_sigma: 60.0,
            svm_tol: 1e-3,
            svm_max_passes: 10,
            svm_standardize: false,
            svm_rbf_form: RbfForm::Sigma,
            train_fraction: 0.6,
            runs: 5,
            seed: None,
        }
    }
}

/// The parameters that decide whether features computed under two configs
/// are comparable. A bank records the fingerprint it was built with;
/// featurization refuses a mismatched one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFingerprint {
    pub decimate_factor: u32,
    pub window_len: usize,
    pub step: usize,
    pub hist_bins: usize,
    pub patch_radius: usize,
    pub epsilon: f64,
    pub detector_k: usize,
    pub detector_t: usize,
    pub normalize_match: bool,
}

impl fmt::Display for PipelineFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "factor={} n={} m={} bins={} radius={} eps={:e} window={}x{} normalize={}",
            self.decimate_factor,
            self.window_len,
            self.step,
            self.hist_bins,
            self.patch_radius,
            self.epsilon,
            self.detector_k,
            self.detector_t,
            self.normalize_match
        )
    }
}

impl PipelineFingerprint {
    /// A config that reproduces this fingerprint, with defaults elsewhere.
    /// Lets a loaded bank drive featurization without a config file.
    pub fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            decimate_factor: self.decimate_factor,
            window_len: self.window_len,
            step: self.step,
            hist_bins: self.hist_bins,
            patch_radius: self.patch_radius,
            epsilon: self.epsilon,
            detector_k: self.detector_k,
            detector_t: self.detector_t,
            normalize_match: self.normalize_match,
            ..PipelineConfig::default()
        }
    }
}

impl PipelineConfig {
    pub fn fingerprint(&self) -> PipelineFingerprint {
        PipelineFingerprint {
            decimate_factor: self.decimate_factor,
            window_len: self.window_len,
            step: self.step,
            hist_bins: self.hist_bins,
            patch_radius: self.patch_radius,
            epsilon: self.epsilon,
            detector_k: self.detector_k,
            detector_t: self.detector_t,
            normalize_match: self.normalize_match,
        }
    }

    pub fn spectrogram_params(&self) -> Result<SpectrogramParams> {
        SpectrogramParams::new(self.window_len, self.step)
    }

    pub fn hist_params(&self) -> Result<HistFieldParams> {
        HistFieldParams::new(self.hist_bins, self.patch_radius, self.epsilon)
    }

    /// Validate cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        self.spectrogram_params()?;
        self.hist_params()?;
        if self.decimate_factor == 0 {
            return Err(Error::InvalidConfig("decimate.factor must be >= 1".into()));
        }
        if self.detector_k == 0 || self.detector_t == 0 {
            return Err(Error::InvalidConfig(
                "detector window must be nonzero".into(),
            ));
        }
        if self.detector_k > self.window_len / 2 + 1 {
            return Err(Error::InvalidConfig(format!(
                "bank.window_k {} exceeds spectrogram bins {}",
                self.detector_k,
                self.window_len / 2 + 1
            )));
        }
        if self.crop_stride_t == 0 {
            return Err(Error::InvalidConfig("bank.stride_t must be >= 1".into()));
        }
        if self.detectors_per_class == 0 {
            return Err(Error::InvalidConfig("bank.nd must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "eval.train_fraction must be in (0, 1)".into(),
            ));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("eval.runs must be >= 1".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidConfig("knn.k must be >= 1".into()));
        }
        for (key, v) in [
            ("svm_a.c", self.svm_a_c),
            ("svm_a.sigma", self.svm_a_sigma),
            ("svm_o.c", self.svm_o_c),
            ("svm_o.sigma", self.svm_o_sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{key} must be > 0")));
            }
        }
        if self.nmf_rank == 0 || self.nmf_max_iter == 0 {
            return Err(Error::InvalidConfig(
                "nmf.rank and nmf.max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Load a JSON object of dotted keys, then validate. Unknown keys reject.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_json_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_json_str(&mut self, text: &str) -> Result<()> {
        let map: BTreeMap<String, serde_json::Value> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config is not a JSON object: {e}")))?;
        for (key, value) in &map {
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Apply one `key=value` override (CLI `--set`).
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("expected key=value, got {assignment:?}"))
        })?;
        // Bare words become strings, everything else parses as JSON.
        let value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        self.set(key.trim(), &value)
    }

    fn set(&mut self, key: &str, value: &serde_json::Value) -> Result<()> {
        fn as_u64(key: &str, v: &serde_json::Value) -> Result<u64> {
            v.as_u64().ok_or_else(|| {
                Error::InvalidConfig(format!("{key} expects a non-negative integer"))
            })
        }
        fn as_f64(key: &str, v: &serde_json::Value) -> Result<f64> {
            v.as_f64()
                .ok_or_else(|| Error::InvalidConfig(format!("{key} expects a number")))
        }
        fn as_bool(key: &str, v: &serde_json::Value) -> Result<bool> {
            v.as_bool()
                .ok_or_else(|| Error::InvalidConfig(format!("{key} expects true/false")))
        }

        match key {
            "decimate.factor" => self.decimate_factor = as_u64(key, value)? as u32,
            "spectrogram.n" => self.window_len = as_u64(key, value)? as usize,
            "spectrogram.m" => self.step = as_u64(key, value)? as usize,
            "histfield.bins" => self.hist_bins = as_u64(key, value)? as usize,
            "histfield.patch_radius" => self.patch_radius = as_u64(key, value)? as usize,
            "histfield.epsilon" => self.epsilon = as_f64(key, value)?,
            "bank.window_k" => self.detector_k = as_u64(key, value)? as usize,
            "bank.window_t" => self.detector_t = as_u64(key, value)? as usize,
            "bank.stride_t" => self.crop_stride_t = as_u64(key, value)? as usize,
            "bank.nd" => self.detectors_per_class = as_u64(key, value)? as usize,
            "bank.kmeans_max_iter" => self.kmeans_max_iter = as_u64(key, value)? as usize,
            "bank.kmeans_tol" => self.kmeans_tol = as_f64(key, value)?,
            "matching.normalize" => self.normalize_match = as_bool(key, value)?,
            "nmf.enabled" => self.nmf_enabled = as_bool(key, value)?,
            "nmf.rank" => self.nmf_rank = as_u64(key, value)? as usize,
            "nmf.max_iter" => self.nmf_max_iter = as_u64(key, value)? as usize,
            "nmf.rel_tol" => self.nmf_rel_tol = as_f64(key, value)?,
            "classifier.kind" => {
                let s = value.as_str().ok_or_else(|| {
                    Error::InvalidConfig("classifier.kind expects a string".into())
                })?;
                self.classifier = ClassifierKind::parse(s)?;
            }
            "knn.k" => self.knn_k = as_u64(key, value)? as usize,
            "svm_a.c" => self.svm_a_c = as_f64(key, value)?,
            "svm_a.sigma" => self.svm_a_sigma = as_f64(key, value)?,
            "svm_o.c" => self.svm_o_c = as_f64(key, value)?,
            "svm_o.sigma" => self.svm_o_sigma = as_f64(key, value)?,
            "svm.tol" => self.svm_tol = as_f64(key, value)?,
            "svm.max_passes" => self.svm_max_passes = as_u64(key, value)? as usize,
            "svm.standardize" => self.svm_standardize = as_bool(key, value)?,
            "svm.kernel_form" => {
                let s = value.as_str().ok_or_else(|| {
                    Error::InvalidConfig("svm.kernel_form expects \"sigma\" or \"gamma\"".into())
                })?;
                self.svm_rbf_form = match s {
                    "sigma" => RbfForm::Sigma,
                    "gamma" => RbfForm::Gamma,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown kernel form {other:?} (expected sigma or gamma)"
                        )))
                    }
                };
            }
            "eval.train_fraction" => self.train_fraction = as_f64(key, value)?,
            "eval.runs" => self.runs = as_u64(key, value)? as usize,
            "seed" => self.seed = Some(as_u64(key, value)?),
            unknown => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key {unknown:?}"
                )))
            }
        }
        Ok(())
    }

    /// Flat dotted-key JSON echo, embedded in reports for provenance.
    pub fn to_dotted_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        let mut put = |k: &str, v: serde_json::Value| {
            map.insert(k.to_string(), v);
        };
        put("decimate.factor", self.decimate_factor.into());
        put("spectrogram.n", self.window_len.into());
        put("spectrogram.m", self.step.into());
        put("histfield.bins", self.hist_bins.into());
        put("histfield.patch_radius", self.patch_radius.into());
        put("histfield.epsilon", self.epsilon.into());
        put("bank.window_k", self.detector_k.into());
        put("bank.window_t", self.detector_t.into());
        put("bank.stride_t", self.crop_stride_t.into());
        put("bank.nd", self.detectors_per_class.into());
        put("bank.kmeans_max_iter", self.kmeans_max_iter.into());
        put("bank.kmeans_tol", self.kmeans_tol.into());
        put("matching.normalize", self.normalize_match.into());
        put("nmf.enabled", self.nmf_enabled.into());
        put("nmf.rank", self.nmf_rank.into());
        put("nmf.max_iter", self.nmf_max_iter.into());
        put("nmf.rel_tol", self.nmf_rel_tol.into());
        put("classifier.kind", self.classifier.as_str().into());
        put("knn.k", self.knn_k.into());
        put("svm_a.c", self.svm_a_c.into());
        put("svm_a.sigma", self.svm_a_sigma.into());
        put("svm_o.c", self.svm_o_c.into());
        put("svm_o.sigma", self.svm_o_sigma.into());
        put("svm.tol", self.svm_tol.into());
        put("svm.max_passes", self.svm_max_passes.into());
        put("svm.standardize", self.svm_standardize.into());
        put(
            "svm.kernel_form",
            match self.svm_rbf_form {
                RbfForm::Sigma => "sigma",
                RbfForm::Gamma => "gamma",
            }
            .into(),
        );
        put("eval.train_fraction", self.train_fraction.into());
        put("eval.runs", self.runs.into());
        if let Some(seed) = self.seed {
            put("seed", seed.into());
        }
        serde_json::Value::Object(map)
    }
}
