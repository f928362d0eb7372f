//! Tool flank wear prediction from high-frequency drilling signals.
//!
//! The crate covers the full pipeline from raw sensor streams to a trained
//! regressor:
//!
//! - [`synthrig`] — synthetic drilling-rig signal generator (spindle motor
//!   current, thrust force, torque) with a ground-truth wear curve, so the
//!   downstream stages can be exercised without access to a physical rig.
//! - [`ingest`] — CSV loading and per-hole cutting-segment isolation, either
//!   from recorded hole markers or by threshold detection on the thrust force.
//! - [`features`] — per-hole RMS / STD / spectral-power features, causal
//!   moving-average smoothing, and sensitivity-based feature selection.
//! - [`wear`] — densification of sparse microscope wear measurements into a
//!   per-hole wear curve by linear interpolation plus bounded random variation.
//! - [`dataset`] — region slicing, sliding-window construction, chronological
//!   train/validation/test splits, and min-max scaling fitted on training data
//!   only.
//! - [`neural`] — a from-scratch stacked LSTM regressor: forward pass,
//!   backpropagation through time, variational dropout, L1/L2 regularization,
//!   Adam, MAE loss, early stopping, and a finite-difference gradient checker.
//! - [`tuner`] — random hyperparameter search with successive halving.
//! - [`eval`] — MAPE evaluation in physical micrometers.
//!
//! Every stage is a pure function of its inputs and seeds: identical inputs
//! produce bit-identical outputs.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod neural;
pub mod rng;
pub mod synthrig;
pub mod tuner;
pub mod wear;

pub use error::{Error, Result};
