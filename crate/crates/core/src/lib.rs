//! Simulation, learning and evaluation pipeline for real-time motorcycle crash
//! detection from on-board telemetry.

pub mod dataprep;
pub mod dynamics;
pub mod error;
pub mod evaluator;
pub mod learners;
pub mod pipeline;
pub mod scenario;
pub mod telemetry;
pub mod tuner;

pub use error::{Error, Result};
