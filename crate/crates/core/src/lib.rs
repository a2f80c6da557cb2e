//! Joint search and recommendation training.
//!
//! A retrieval model (query text against item text) and a recommendation
//! model (user id against item text) are trained over one shared item set.
//! Both read item text through the same term-embedding matrix and the same
//! global term weights, and both minimise a pairwise logistic loss. Training
//! the two together on the summed loss is compared against training each one
//! alone.
//!
//! The crate is split by pipeline stage:
//!
//! - [`numerics`]: dense tensors, a reverse-mode tape, Adam and a
//!   finite-difference gradient checker.
//! - [`corpus`]: review ingestion, vocabulary, category queries, splits,
//!   pairwise samplers and a synthetic world generator.
//! - [`model`]: the representation towers and matching networks.
//! - [`training`]: joint and individual optimisation, validation and grid
//!   search.
//! - [`eval`]: ranking metrics, the paired t-test and comparison tables.
//! - [`cli`]: run configuration, checkpoints and the `prepare`, `train`,
//!   `eval` and `compare` commands.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
