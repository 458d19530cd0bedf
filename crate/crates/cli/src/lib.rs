//! Batch pipeline around `tsad-core`: dataset generation, training,
//! scoring, evaluation and the outlier coverage experiment.

pub mod app;
pub mod commands;
pub mod config;
pub mod plot;

pub use commands::exit_code;
pub use config::RunConfig;
