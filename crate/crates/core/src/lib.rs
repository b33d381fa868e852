//! Structure-adaptive sequential testing (SAST) for online false discovery
//! rate control.
//!
//! Hypotheses arrive one at a time and each must be accepted or rejected
//! before the next arrives, with the FDR held below `alpha` at every time
//! point. SAST ranks hypotheses by their conditional local false discovery
//! rate (Clfdr), keeps the running average of rejected Clfdr values within
//! `alpha`, and learns a barrier from recent history so that budget is not
//! wasted on weak rejections.
//!
//! - [`model`]: two-group mixture, oracle Clfdr, z/p conversions.
//! - [`estimators`]: kernel estimates of the density, the non-null
//!   proportion and the plug-in Clfdr.
//! - [`sast`]: the sequential decision engine.
//! - [`offline`]: BH, weighted BH, the step-wise Clfdr rule and the oracle
//!   threshold.
//! - [`baselines`]: LOND, LORD++ and a fixed threshold.
//! - [`simulation`]: stream generators, FDR/MDR evaluation and the
//!   replication runner.

pub mod baselines;
pub mod error;
pub mod estimators;
pub mod model;
pub mod offline;
pub mod sast;
pub mod simulation;

pub use error::{Error, Result};
