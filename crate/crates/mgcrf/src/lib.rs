//! Structured regression on temporal attributed graphs with missing labels.
//!
//! The centerpiece is a Gaussian conditional random field whose training
//! objective marginalizes unlabeled nodes out through the Schur complement of
//! the precision matrix, so partially labeled graphs — including nodes that
//! are never labeled — keep contributing structure and attributes. Around it
//! sit the comparison baselines (ignore-missing GCRF, a feed-forward
//! regressor, Gaussian-process multiple imputation, harmonic-field
//! imputation), a synthetic grid generator, a family of label-removal
//! mechanisms, and an experiment harness with deterministic seeding.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release -p mgcrf --example assemble_and_predict
//! cargo run --release -p mgcrf --example marginal_vs_ignore
//! cargo run --release -p mgcrf --example experiment_sweep
//! ```
//!
//! or the thin CLI (`synth`, `run`, `restrict`, `bench`, `impute`).

pub mod baselines;
pub mod error;
pub mod ffn;
pub mod gcrf;
pub mod gp;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod marginal;
pub mod missingness;
pub mod optim;
pub mod synthgen;

pub use error::{Error, Result};
