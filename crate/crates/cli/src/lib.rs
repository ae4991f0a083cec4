//! Command line front end for geographic service diversity analysis.
//!
//! The library half of the binary: strict CSV input, the staged pipeline
//! with its manifest, planted synthetic instances, and the scaling bench.
//! Everything here is deterministic for a fixed configuration and seed;
//! the binary in main.rs is a thin argument parser over these modules.

pub mod bench;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod synth;

pub use error::{CliError, Result};
