//! Pairwise candidate reranking for text generation: candidate pools,
//! reference metrics, a joint pair encoder with its trainer, bubble-pass
//! selection, pointwise baselines and the experiment pipeline.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the pipeline.

pub mod baselines;
pub mod checkpoint;
pub mod decoding;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod pair_encoder;
pub mod pair_trainer;
pub mod rank_inference;
pub mod scalar;
pub mod store;
pub mod synthetic;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// PairReranker in single precision, as trained by the pipeline.
pub type PairReranker = pair_encoder::ScorerModel<f32>;
pub type PairRerankerF64 = pair_encoder::ScorerModel<f64>;
/// SimCLS or SummaReranker in single precision.
pub type PointwiseReranker = baselines::PointwiseScorer<f32>;
pub type PointwiseRerankerF64 = baselines::PointwiseScorer<f64>;
