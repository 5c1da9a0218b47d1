//! A desk-scale learned image codec built around a two-group 3-D context
//! entropy model, residual Gaussian-mixture parameter estimation, and
//! padding-aware rate-distortion training.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod context;
pub mod error;
pub mod format;
pub mod gmm;
pub mod metrics;
pub mod model;
pub mod ppm;
pub mod rangecoder;
pub mod selftest;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{ConvWeights, Graph, RngState, Tensor, Var};
