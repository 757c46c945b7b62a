//! Benchmark harness for gaze-velocity embeddings.
//!
//! The pipeline turns raw gaze position recordings (degrees of visual angle)
//! into fixed-length velocity sequences, embeds each sequence into a 128-d
//! vector, and scores how well subject identity persists across recording
//! sessions while the signal is degraded in controlled ways (decimation,
//! truncation, fewer sequences, additive noise).
//!
//! Stages map onto modules:
//!
//! * [`model`] / [`io`] — data types and their CSV/JSON representations
//! * [`preprocess`] — gaze bounds, Savitzky-Golay velocity, segmentation,
//!   clamping, global z-scoring
//! * [`manipulate`] — signal-quality manipulations and spatial precision
//! * [`embed`] — embedding providers (deterministic feature embedder, seeded
//!   random convolutional embedder) and centroids
//! * [`metrics`] — cosine score sets, EER, Kendall's W persistence, Spearman
//!   intercorrelation
//! * [`fitting`] — least-squares linear/log trend fits
//! * [`synthetic`] / [`experiment`] — synthetic corpus generation and the
//!   sweep runner that ties everything together
//!
//! Numeric kernels ([`stats`], [`savgol`], [`metrics`], [`fitting`]) are
//! generic over the scalar type via [`num::Scalar`]; the pipeline types fix
//! the scalar to `f64`, aliased as [`Real`].

pub mod dsp;
pub mod embed;
pub mod error;
pub mod experiment;
pub mod fitting;
pub mod io;
pub mod manipulate;
pub mod metrics;
pub mod model;
pub mod num;
pub mod preprocess;
pub mod savgol;
pub mod seeding;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};

/// Scalar type used by the concrete pipeline.
pub type Real = f64;

/// Trend fit result at the pipeline scalar.
pub type FitResult = fitting::FitResult<Real>;

/// Genuine/impostor score sets at the pipeline scalar.
pub type ScoreSets = metrics::ScoreSets<Real>;
