//! Transductive semi-supervised text classification over precomputed
//! embedding vectors.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: load (or synthesize) an embedding matrix `X`, choose a
//!    labeled subset and build the label matrix `Y`.
//! 2. [`graph`]: connect similar rows (k-NN, ε-neighborhood or complete
//!    graph) and renormalize the adjacency into `S = D̂^-½ (A + I) D̂^-½`.
//! 3. [`gcn`]: train `Z = softmax(S · ReLU(S · X · θ1) · θ2)` with full-batch
//!    gradient descent on the cross-entropy of the labeled rows.
//! 4. [`baseline`]: a purely supervised multinomial logistic regression.
//! 5. [`harness`]: accuracy metrics and the label-budget sweep that compares
//!    the models.

pub mod baseline;
pub mod checkpoint;
pub mod dataset;
mod error;
pub mod gcn;
pub mod graph;
pub mod harness;
pub mod rng;

pub use error::{Error, Result};
