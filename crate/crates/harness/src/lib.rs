//! Experiment runner for the degenerate parabolic toolkit: config parsing,
//! command dispatch and result files.

pub mod checks;
pub mod config;
pub mod record;
pub mod run;

pub use degenlab_core;
