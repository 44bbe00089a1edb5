//! User-entity differentially private federated training of small language
//! models.
//!
//! The crate is split along the pipeline:
//!
//! - [`corpus`]: annotated text ingestion, user partitioning, detected and
//!   extended entity sets, de-identification.
//! - [`model`]: a feedforward n-gram language model and a bag-of-words
//!   classifier with analytic gradients, perplexity and error rate.
//! - [`dpfed`]: user and entity sampling, clipped local updates, the weighted
//!   estimators, sensitivity bounds, noise and the training loop.
//! - [`accountant`]: Rényi moments accounting for the subsampled Gaussian
//!   mechanism and the word-level local-DP budget formulas.
//! - [`cli`]: the `uedp` command-line front end.

pub mod accountant;
pub mod cli;
pub mod corpus;
pub mod dpfed;
pub mod model;
pub mod rng;
