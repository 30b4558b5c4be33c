//! Solving linear Kolmogorov PDEs with affine coefficients by empirical risk
//! minimization over clipped ReLU networks.
//!
//! The crate is organized along the pipeline:
//!
//! - [`net`]: networks, their realization and the exact constructions
//!   (clipping, put payoff, averaged composition with affine maps).
//! - [`sde`]: affine SDE simulation, the pathwise affine terminal map and
//!   Feynman-Kac Monte-Carlo references.
//! - [`learning`]: datasets, empirical risk, training and L² evaluation.
//! - [`bounds`]: covering-number and sample-complexity certificates.
//! - [`constructive`]: the Monte-Carlo network builder.
//! - [`pipeline`]: end-to-end experiments used by the CLI.

pub mod bounds;
pub mod constructive;
pub mod error;
pub mod learning;
pub mod net;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
