//! Measures how service usage varies across the areas of a territory and
//! compresses that variation into interpretable spatial clusters.
//!
//! The crate is organized as a pipeline over a traffic matrix (areas x
//! services):
//!
//! - [`model`]: joint probability model, conditionals, restriction to
//!   service subsets.
//! - [`info`]: entropy, mutual information, top-k information curves.
//! - [`informative`]: channel capacity via Blahut-Arimoto and selection of
//!   the informative service subset.
//! - [`cluster`]: greedy agglomerative merging of adjacent areas that pays
//!   the least mutual information per merge.
//! - [`interpret`]: significance vectors and incidence matrices linking
//!   clusters to demographic levels and services.
//!
//! All structures are immutable after construction; operations return new
//! values, which keeps every stage safe to share across threads.

#![forbid(unsafe_code)]

pub mod cluster;
pub mod info;
pub mod informative;
pub mod interpret;
pub mod math;
pub mod model;

/// Tolerance for probability normalization checks.
pub const NORM_TOL: f64 = 1e-9;

/// Magnitude of negative rounding residue that clamps to zero. Anything
/// more negative in a nonnegative quantity is an internal error.
pub const CLAMP_TOL: f64 = 1e-12;
