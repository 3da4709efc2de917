//! Eccentricity-dependent CNN model of visual search.
//!
//! The crate is `no_std` (with `alloc`) so the numeric kernels, the backbone
//! forward pass, attention fusion, the fixation loop and the stimulus
//! generators can be embedded anywhere. File formats, the experiment harness
//! and the command line live in the companion `eccnet` crate.
//!
//! Layer numbering follows the Keras VGG16 convention: convolutions at
//! 1, 2, 4, 5, 7, 8, 9, 11, 12, 13, 15, 16, 17 and pooling at 3, 6, 10, 14, 18.
//! Top-down modulation reads the search features at layers 9, 13 and 17 and the
//! pooled target features one layer deeper.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod attention;
pub mod backbone;
mod error;
pub(crate) mod math;
pub mod ops;
pub mod search;
pub mod stimuli;
mod tensor;

pub use error::{Error, Result};
pub use tensor::{Filter, Tensor};

/// Display resolution used for every stimulus and for the dva conversions.
pub const PX_PER_DVA: f64 = 30.0;
