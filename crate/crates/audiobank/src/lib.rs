//! Detector-bank audio event representation and classification toolkit.
//!
//! The pipeline: decimate a signal, compute its short-time power
//! spectrogram, turn it into a per-position histogram field, correlate a
//! bank of class-wise detector crops against it with the Bhattacharyya
//! coefficient (FFT fast path), max-pool each match map into 21 values,
//! and feed the concatenated feature vector to NMF and/or a classifier.
//! An experiment harness reproduces the split/run/sweep protocol on a
//! bundled synthetic corpus.

pub mod audio_io;
pub mod bank;
pub mod classify;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod histfield;
pub mod matching;
pub mod nmf;
pub mod pipeline;
pub mod seeds;
pub mod spectrogram;

pub use audio_io::Signal;
pub use bank::DetectorBank;
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use featurize::FeatureVector;
