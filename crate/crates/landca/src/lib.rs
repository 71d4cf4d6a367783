//! Land-use-change modeling on categorical rasters.
//!
//! The crate covers the full calibrate / simulate / validate loop:
//!
//! - [`raster`] — grid containers, ASCII grid I/O, distance transform,
//!   binning and masking;
//! - [`calibrate`] — transition matrices, weights of evidence, posterior
//!   probability surfaces and the serializable model artifact;
//! - [`allocate`] — the expander and patcher cellular-automata operators and
//!   the seeded, reproducible simulation driver;
//! - [`validate`] — multiple-window map similarity and threshold lookup.

pub mod allocate;
pub mod calibrate;
pub mod error;
pub mod raster;
pub mod validate;

pub use error::{Error, Result};
