//! Acoustic blind-corner vehicle detection: multichannel STFT, SRP-PHAT
//! direction-of-arrival features, a linear SVM classifier, a synthetic
//! T-junction scene generator and an evaluation harness.

pub mod beamform;
pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod seed;
pub mod signal;
pub mod stft;
pub mod synth;

pub use error::{Error, Result};
