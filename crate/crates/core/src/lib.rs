//! Training under a fixed wall-clock budget with loss-based dynamic subset selection.
//!
//! The engine warms a model up on the full dataset, measures the cost of one
//! mini-batch, ranks every sample by a variance-weighted score built from its
//! recent training losses, and then spends the rest of the budget on the
//! top-`(1 - alpha)` fraction. After every re-rank period the active subset and
//! the excluded samples are merged and ranked again, so samples can re-enter.
//!
//! Module map:
//!
//! * [`tensor`], [`model`], [`loss`], [`optim`], [`checkpoint`]: the numeric core
//!   (MLP classifier, small convolutional density regressor, Adam).
//! * [`data`]: datasets with stable sample ids, CIFAR-10 binary loading,
//!   synthetic classification and counting tasks, density-map ground truth.
//! * [`importance`]: the score ledger, ranking and subset selection.
//! * [`budget`]: wall-clock accounting with an injectable virtual clock.
//! * [`trainer`]: the budgeted training loop, the random-sampling baseline and
//!   the run manifest.
//! * [`metrics`]: accuracy, counting MAE/MSE and run comparison.
//! * [`config`] and [`commands`]: experiment specs and the `train`, `compare`
//!   and `sweep` commands behind the `tftb` binary.

// negated float comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod importance;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
