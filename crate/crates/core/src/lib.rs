//! A reading model that learns what to skip.
//!
//! A recurrent language model reads text word by word while a hard
//! attention module decides, before each word, whether to fixate it or
//! skip it; skipped words never reach the reader. A decoder reconstructs
//! the sequence from the reader's final state, so the training signal
//! rewards fixation patterns that preserve the text, and a per-fixation
//! cost pushes the policy toward reading less. Training runs in two
//! phases: the reader and decoder learn under random masks, then they are
//! frozen and the attention module is trained with a score-function
//! gradient estimator against a learned value baseline.
//!
//! Everything is plain Rust: tensors are flat `Vec`s, gradients are
//! written by hand, and all sampling goes through a seeded counter-based
//! generator, so any run is reproducible bit for bit. The crate is
//! generic over the scalar type (`f32` or `f64`); the `*64` aliases below
//! pick the double-precision instantiation used by the command line tools.
//!
//! Module map:
//! - [`tensor`], [`scalar`], [`softmax`], [`lstm`], [`layers`]: numeric core.
//! - [`optim`], [`gradcheck`]: gradient descent and finite-difference checks.
//! - [`corpus`]: vocabulary, sequence chunking, eye-tracking TSV.
//! - [`model`], [`value`]: reader/attention/decoder and the value network.
//! - [`training`]: the two training phases.
//! - [`baselines`]: random, threshold and rescaled comparison masks.
//! - [`eval`]: perplexity, agreement metrics, regressions, reports, heatmaps.
//! - [`synthetic`]: generated corpora with controllable statistics.
//! - [`checkpoint`]: versioned parameter serialization.

pub mod baselines;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod softmax;
pub mod synthetic;
pub mod tensor;
pub mod training;
pub mod value;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations, the default everywhere outside tests.
pub type Tensor64 = tensor::Tensor<f64>;
pub type Model64 = model::ModelParams<f64>;
pub type Mask64 = model::FixationMask<f64>;
pub type Episode64 = model::Episode<f64>;
pub type Value64 = value::ValueParams<f64>;
pub type SgdConfig64 = optim::SgdConfig<f64>;
