//! File formats, configuration and the training / post-editing pipeline
//! built on `sape-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Result, SapeError};
