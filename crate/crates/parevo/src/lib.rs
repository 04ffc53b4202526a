//! File formats, configuration and stage orchestration around `parevo-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::CliError;
