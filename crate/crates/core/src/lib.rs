//! Scene factorization with complex phasor hypervectors.
//!
//! Images are sparse-coded with a convolutional dictionary, the coefficient
//! maps are bundled into a phasor hypervector with periodic fractional power
//! position codes, and a resonator network recovers object identity and
//! position from the resulting scene vector.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod hd;
mod io;
pub mod multi;
pub mod resonator;
pub mod sparse;
pub mod whitening;

pub use error::{Error, Result};
