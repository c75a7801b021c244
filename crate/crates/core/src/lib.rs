//! Stability-driven cluster discovery for tabular catalogs.
//!
//! The crate perturbs a clustering analysis along two axes, data
//! subsampling and the choice of preprocessing pipeline, and uses the
//! agreement of the resulting partitions to choose a clustering method and
//! cluster count. Selected models are then aggregated into a consensus
//! partition, scored per row for local stability, and checked for
//! train/test generalizability with a random-forest classifier.
//!
//! Every randomized step takes an explicit seed; results do not depend on
//! the number of worker threads.

pub mod cluster;
pub mod config;
pub mod dataset;
pub mod diag;
pub mod embed;
pub mod error;
pub mod forest;
pub mod matrix;
pub mod preprocess;
pub mod report;
pub mod seed;
pub mod validate;

pub use error::{Error, Result};
pub use matrix::Matrix;
