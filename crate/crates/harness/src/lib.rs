//! Experiment harness: sweeps, traces, ρ studies, data-driven runs and plots.

pub mod config;
pub mod error;
pub mod plot;
pub mod records;
pub mod runner;

pub use config::{Selector, SweepSpec};
pub use error::{HarnessError, Result};
pub use records::{ResultRow, RhoRow, Status};
