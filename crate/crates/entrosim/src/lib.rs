//! entrosim: entropy-graph extraction from binary files and a weight-sharing
//! Siamese convolutional classifier trained with a combined softmax +
//! weighted-center-loss objective.
//!
//! Pipeline: [`synth`] generates a labeled synthetic corpus, [`entropy`] and
//! [`corpus`] turn binaries into `.egr` entropy-graph files plus a manifest,
//! [`train`] runs positive-pair training over the [`nn`] engine, and [`eval`]
//! scores checkpoints (confusion matrix, weighted P/R/F1, ROC-AUC).

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod egr;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod nn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
