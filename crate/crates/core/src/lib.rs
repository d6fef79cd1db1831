//! Inference-time control of gendered word forms in sequence-to-sequence
//! translation.
//!
//! A base encoder-decoder is log-linearly fused with a gender-specific
//! external language model while an estimate of the base model's internal
//! language model is subtracted:
//!
//! ```text
//! y* = argmax_y  log p_base(y|x) - beta_ilm * log p_ilm(y) + beta_elm * log p_elm(y)
//! ```
//!
//! The internal LM is the base decoder fed with the grand mean of all encoder
//! frames over the training sources instead of a real encoding.

pub mod cli;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod extract;
pub mod fusion;
pub mod ngram;
pub mod seq2seq;
pub mod synth;
pub mod tune;
pub mod types;

pub use error::{Error, Result};
