//! Locally interpretable modelling of black-box predictors with
//! reinforcement-learning-guided instance selection.
//!
//! A trained black box is distilled into per-instance surrogates (weighted
//! ridge or a depth-3 regression tree). An instance-wise weight estimator,
//! trained with REINFORCE against a global interpretable baseline, decides
//! which training instances each surrogate is fitted on.

pub mod baselines;
pub mod bench;
pub mod blackbox;
pub mod cart;
pub mod data;
pub mod error;
pub mod estimator;
pub mod explanation;
pub mod interpretable;
pub mod metrics;
pub mod nn;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
