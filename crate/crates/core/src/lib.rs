//! Verification lab for the latent-cognizance reading of softmax outputs.
//!
//! A classifier trained on seen classes only is compared against an exact
//! Bayesian oracle built from fully known synthetic distributions. The lab
//! checks which reading of the softmax vector the trained network actually
//! approximates: the plain posterior p(y=k|x) over the whole class universe,
//! or the latent posterior p(y=k|x,s) conditioned on the instance belonging
//! to a seen class.
//!
//! Modules:
//! - [`dmvn`]: discretized diagonal-covariance Gaussians (sampling, CDF, PMF).
//! - [`oracle`]: exact mixture probabilities for a scenario.
//! - [`datagen`]: seeded train/test dataset generation and CSV persistence.
//! - [`network`]: from-scratch 2-16-3 feed-forward net with ADAM training.
//! - [`experiment`]: the five-case comparison harness and report emission.
//! - [`cli`]: the `lc-lab` command-line front end.

pub mod cli;
pub mod datagen;
pub mod dmvn;
pub mod error;
pub mod experiment;
pub mod network;
pub mod oracle;

pub use error::{LcError, Result};
