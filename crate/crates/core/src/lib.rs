//! Defect prediction with fuzzy oversampling, a class-weighted neural
//! network and epsilon-domination tabu tuning, plus the evaluation and
//! statistics needed to compare it against baselines.

pub mod baselines;
pub mod dataset;
pub mod demo;
pub mod dodge;
pub mod error;
pub mod features;
pub mod ghost;
pub mod metrics;
pub mod nn;
pub mod sampling;
pub mod stats;

pub use error::{GhostError, Result};
