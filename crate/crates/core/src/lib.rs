//! Tabular synthetic data generation with optional differential privacy,
//! plus the evaluation stack used to benchmark it: quality/utility/privacy
//! metrics, downstream classifiers, and a shadow-model membership inference
//! attack.
//!
//! The crate is organized around a small set of building blocks:
//!
//! * [`data`] — mixed-type tables, CSV + sidecar loading, splits and sampling
//! * [`transforms`] — reversible encodings between tables and numeric matrices
//! * [`nn`] — a dense network engine with per-sample gradients and DP-Adam,
//!   generic over the scalar type (see [`Real`])
//! * [`privacy`] — Rényi-DP accounting for Poisson-subsampled Gaussian noise
//! * [`synth`] — Gaussian copula, CTGAN, TVAE and their DP variants
//! * [`trees`] — random forests and gradient-boosted trees
//! * [`metrics`] — column shapes, pair trends, balanced accuracy, DCR scores
//! * [`mia`] — the canary-based shadow-model attack
//! * [`demo`] — seeded stand-in datasets shaped like the public benchmarks

pub mod data;
pub mod demo;
pub mod error;
pub mod metrics;
pub mod mia;
pub mod nn;
pub mod privacy;
pub mod rng;
pub mod synth;
pub mod transforms;
pub mod trees;

pub use error::{Error, Result};

/// Scalar type used by the table/metrics pipeline and the default models.
pub type Scalar = f64;

