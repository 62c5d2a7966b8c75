//! Orchestration of the shape-inversion pipeline: dataset generation,
//! simulation, the three training stages, evaluation and the two studies.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{Context, Layout};
