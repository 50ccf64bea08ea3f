//! Frequency-domain analysis of convolutional image generators.
//!
//! The library is built around one observation: every linear stage of a
//! convolutional generator (upsampling, convolution, normalization) has an
//! exact counterpart in the 2D DFT domain, so the magnitude spectrum of a
//! generated image carries a stable signature of the architecture and weights
//! that produced it. The modules below implement the spectral algebra, small
//! trainable generator pools to exercise it, fingerprint extraction, and
//! verification / identification / lineage harnesses on top, plus a file
//! format layer and everything the `freqprint` CLI needs.

pub mod arch;
pub mod attribution;
pub mod conv;
pub mod dft;
pub mod fingerprint;
pub mod io;
pub mod norm_act;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod upsample;

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("inconsistent data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
