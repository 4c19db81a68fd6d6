//! Command-line pipeline around the `salfold` library.

pub mod artifacts;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{FoldMode, PipelineConfig};
pub use error::{CliError, ErrorKind};
