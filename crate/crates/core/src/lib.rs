//! Beam alignment for dual-polarized millimeter-wave MIMO links.
//!
//! The crate is organized bottom-up:
//!
//! - [`manifold`]: ULA steering vectors, the beam-gain function, ψ-domain
//!   sector grids, two-level beam codebooks and phase quantization.
//! - [`channel`]: dual-polarized channel realizations (single-path Kronecker
//!   form and a ray-sum street model) plus the mono-polarized baseline.
//! - [`sounding`]: DFT training codebooks and the four decoupled observation
//!   streams `y_vv, y_vh, y_hv, y_hh`.
//! - [`estimator`]: hard alignment, ML soft alignment (single stream and joint),
//!   two-round refinement, gain estimation and beamformer assembly.
//! - [`adaptive`]: Marcum-Q, the misalignment-probability bound and the
//!   sounding-length planner.
//! - [`sim`]: deterministic parallel Monte Carlo engine and experiment presets.
//! - [`validate`]: oracle suites used by the `validate` CLI subcommand.

pub mod adaptive;
pub mod channel;
pub mod estimator;
pub mod linalg;
pub mod manifold;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod sounding;
pub mod stats;
pub mod validate;

mod ddouble;

pub use num_complex::Complex64;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
