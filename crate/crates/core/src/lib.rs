//! Spacecraft telemetry workbench: ingestion, dataset construction for the
//! Mars Express power and INTEGRAL belt-crossing use cases, from-scratch
//! multi-target learners, and feature importance.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The data
//! pipelines produce `f64` datasets; use [`Dataset::cast`] to train in
//! single precision.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod importance;
pub mod ingest;
pub mod integral;
pub mod learners;
pub mod metafile;
pub mod mex;
pub mod run;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use dataset::{Dataset, Feature};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Version string recorded in every metafile.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Model = learners::TrainedModel<f64>;
pub type Model32 = learners::TrainedModel<f32>;
pub type Scaler = learners::Scaler<f64>;
pub type Tree = learners::tree::Tree<f64>;
