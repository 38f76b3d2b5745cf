//! Quality assessment and enhancement of grayscale radiographs.
//!
//! The crate covers the full restore pipeline: exposure classification and
//! equalization ([`exposure`]), classical enhancement ([`enhance`]), bicubic
//! resampling ([`resample`]), CNN super-resolution trained from scratch
//! ([`nn`]), and full-reference scoring ([`metrics`]). [`synth`] produces
//! deterministic phantoms for testing and benchmarking.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod enhance;
pub mod error;
pub mod exposure;
pub mod filter;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod pgm;
pub mod resample;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use image::{FloatImage, GrayImage, PadMode};
