//! Numerical verification of the action functional, its cylinder solver and
//! gradient flow, driven by JSON configs and reported as JSON records.

pub mod checks;
pub mod config;
pub mod context;
pub mod modal;
pub mod report;
pub mod suites;

pub use config::{Config, ConfigError};
pub use context::Lab;
pub use report::{Record, Report};
pub use suites::{emit_plots_data, run_suite, Suite};
