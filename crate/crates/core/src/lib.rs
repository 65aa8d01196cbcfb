//! Differentially private combinatorial optimization built on one simple
//! fact: a mechanism that is one-sided (add) DP becomes two-sided pure DP
//! when run on a Poisson subsample of its input.
//!
//! The crate provides the base primitives (seeded randomness, noise
//! samplers, the exponential mechanism, subsampling and the amplification
//! calculator), the two generic adaptive engines (repeated exponential
//! mechanism and repeated above-threshold), application pipelines for
//! decomposable submodular maximization, open-set set cover, metric
//! k-median/k-means and shifting heavy hitters, and an exact auditor that
//! verifies the privacy claims by enumeration on small instances.

pub mod audit;
pub mod clustering;
pub mod dataset;
pub mod em;
pub mod error;
pub mod heavyhitters;
pub mod mechanisms;
pub mod noise;
pub mod rng;
pub mod setcover;
pub mod submodular;
pub mod subsample;

pub use dataset::{Dataset, PrivacyParams, Record};
pub use error::{Error, Result};
pub use rng::RandomSource;
pub use subsample::SubsampleRate;
