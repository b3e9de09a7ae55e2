//! Object counting with global sum pooling.
//!
//! A small reverse-mode tensor engine ([`tensor`]) drives a convolutional
//! counting network ([`model`]) whose head either sums ([`model::Head::Gsp`])
//! or averages ([`model::Head::Gap`]) the final feature map. Synthetic scenes
//! ([`synth`], [`dataset`]) feed a patch-based trainer ([`train`]); the
//! evaluator ([`eval`]) measures full-image and tiled counts, tile-error
//! cancellation, activation maps and pooling linearity.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
