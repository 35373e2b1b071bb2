//! Intrusion detection on NSL-KDD style connection records.
//!
//! The pipeline runs supervised MDL discretization, CFS / information-gain
//! feature selection, naive Bayes optionally boosted with AdaBoost.M1, and
//! stratified cross-validation with per-class precision, recall,
//! F-measure and false positive rate.
//!
//! Feature indices are 1-based throughout, matching the NSL-KDD column
//! numbering.

pub mod classify;
pub mod data;
pub mod discretize;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod select;
pub mod synthetic;
pub mod table;

pub use error::{Error, Result};
