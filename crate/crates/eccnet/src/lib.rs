//! Files, experiments and the command line around `eccnet-core`.
//!
//! - [`weights`]: the manifest + blob weight bundle.
//! - [`mod@reference`]: reference activations shipped with a bundle.
//! - [`dump`]: PGM images and JSON sidecars for stimuli and attention maps.
//! - [`harness`]: runs an experiment's trials in parallel and summarises them.
//! - [`output`]: CSV, JSON, JSON-lines and SVG outputs of a report.
//! - [`verify`]: the built-in numeric fixtures behind `eccnet verify`.

pub mod dump;
pub mod harness;
pub mod output;
pub mod reference;
pub mod verify;
pub mod weights;

#[doc(hidden)]
pub mod testing;

pub use eccnet_core as core;

/// Environment variable holding the worker count for trial-level parallelism.
pub const WORKERS_ENV: &str = "ECCNET_WORKERS";
