//! Link-prediction benchmarks on synthetic mixed-membership networks.
//!
//! The crate generates directed or undirected networks from a Poisson
//! mixed-membership stochastic block model, fits Poisson factorization
//! models (with and without a categorical node attribute) and graph
//! autoencoders (GAE, VGAE), and compares them by test AUC on masked
//! cross-validation folds under feature and heterophily perturbations.
//!
//! Module map:
//!
//! - [`graph`]: adjacency, statistics, fold splitting and masking
//! - [`synth`]: the generator and its ground truth
//! - [`pgm`]: multiplicative EM fits and dyad scores
//! - [`gnn`]: autoencoders with analytic gradients and Adam
//! - [`features`]: K-means reduction and feature noise
//! - [`eval`]: AUC, per-fold evaluation, grid search
//! - [`bench`]: experiment drivers behind the `netlinkbench` binary

pub mod bench;
pub mod error;
pub mod eval;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod matrix_io;
pub mod pgm;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
