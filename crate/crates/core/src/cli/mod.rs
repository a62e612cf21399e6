//! Configuration, orchestration and file output behind the `lvseg` binary.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{parse_config, RunConfig};
pub use output::{emit_field, emit_image, read_field, OutputError};
pub use pipeline::{run, Command, RunArtifacts, RunSummary, Stage};
