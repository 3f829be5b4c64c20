//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported wav encoding in {path}: {detail} (expected 16-bit PCM, mono or stereo)")]
    UnsupportedWav { path: PathBuf, detail: String },

    #[error("zero-length audio in {0}")]
    ZeroLengthAudio(PathBuf),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("sample rate must be positive")]
    ZeroSampleRate,

    #[error("decimation factor must be at least 1")]
    ZeroDecimationFactor,

    #[error("sample rate {rate} is not divisible by decimation factor {factor}")]
    NonDivisibleRate { rate: u32, factor: u32 },

    #[error("signal too short: {len} samples, need at least {need}")]
    SignalTooShort { len: usize, need: usize },

    #[error("invalid event class spec: {0}")]
    InvalidEventSpec(String),

    #[error("corpus spec/count list length mismatch: {specs} specs vs {counts} counts")]
    CorpusShapeMismatch { specs: usize, counts: usize },

    #[error("window length must be at least 2, got {0}")]
    WindowTooShort(usize),

    #[error("invalid spectrogram params: {0}")]
    InvalidSpectrogramParams(String),

    #[error("invalid histogram field params: {0}")]
    InvalidHistFieldParams(String),

    #[error("histogram bin count mismatch: {0} vs {1}")]
    BinCountMismatch(usize, usize),

    #[error(
        "no crop candidates: window {window_k}x{window_t} exceeds every clip of class {class_id}"
    )]
    NoCandidates {
        class_id: usize,
        window_k: usize,
        window_t: usize,
    },

    #[error("k-means needs at least {requested} candidates, got {available}")]
    TooFewCandidates { requested: usize, available: usize },

    #[error("detector ({det_k}x{det_t}) larger than signal field ({sig_k}x{sig_t})")]
    DetectorTooLarge {
        det_k: usize,
        det_t: usize,
        sig_k: usize,
        sig_t: usize,
    },

    #[error("empty match map")]
    EmptyMatchMap,

    #[error("pipeline fingerprint mismatch: bank built with {bank}, current config is {config}")]
    FingerprintMismatch { bank: String, config: String },

    #[error("matrix contains a negative or non-finite entry at ({0}, {1})")]
    InvalidMatrixEntry(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid neighbor count k={k} for training set of {n}")]
    InvalidNeighborCount { k: usize, n: usize },

    #[error("training set must contain at least two classes")]
    SingleClassTrainingSet,

    #[error("class {class_id} has too few samples: {count}")]
    ClassTooSmall { class_id: usize, count: usize },

    #[error("class {class_id} left without test samples (training fraction and bank-source exclusion consumed them all)")]
    EmptyTestSet { class_id: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("bad file format in {path}: {detail}")]
    BadFormat { path: PathBuf, detail: String },

    #[error("experiment run {run} failed: {source}")]
    RunFailed {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn bad_format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::BadFormat {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code the CLI maps this error to: misuse (bad config,
    /// incompatible inputs) exits 2, runtime failures exit 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::FingerprintMismatch { .. } => 2,
            _ => 1,
        }
    }
}
