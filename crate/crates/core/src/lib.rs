//! Pre-trained tabular encoders for cross-country few-shot prediction.
//!
//! The crate trains a masked autoencoder on pooled multi-country survey
//! features, fine-tunes it as a binary classifier on small local samples,
//! and evaluates the transfer against cold-start baselines (histogram
//! gradient boosting, a plain MLP, logistic regression) with the full
//! validation kit: bootstrap confidence intervals, leave-one-country-out
//! folds, few-shot curves, calibration, permutation importance, an equity
//! audit, and domain-divergence estimation. A built-in synthetic
//! multi-country generator with a controllable shift knob makes every
//! protocol runnable at desk scale.

pub mod baselines;
pub mod classifier;
pub mod data;
pub mod error;
pub mod eval;
pub mod hpo;
pub mod jobs;
pub mod mat;
pub mod nn;
pub mod rng;
pub mod tmae;

pub use error::{Error, Result};
