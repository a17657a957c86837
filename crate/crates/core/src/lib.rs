//! Explainable multiclass classification: bagged one-vs-one ensembles,
//! model-agnostic attribution, counterfactual search and the
//! necessity/sufficiency measures that connect them.

pub mod artifact;
pub mod attribution;
pub mod causality;
pub mod cli;
pub mod counterfactual;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod plot;
pub mod seed;

pub use error::{Error, Result};
