//! Missing check-in identification with bi-directional spatio-temporal
//! dependence and dynamic preference.
//!
//! The pipeline runs `ingest` (raw dumps to samples), `model` (forward pass,
//! checkpoints), `train` (hand-derived backward pass, Adam, early stopping)
//! and `eval` (Recall@K, F1@K, MAP). `baselines` holds the counting rankers
//! and `synthetic` the generated corpora used by tests and `stddp selfcheck`.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod geodata;
pub mod ingest;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
