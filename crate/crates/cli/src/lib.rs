//! Spec parsing, the end-to-end pipeline and the property suite behind the
//! `dimbound` binary.

pub mod cli;
pub mod error;
pub mod pipeline;
pub mod spec;
pub mod verify;

pub use error::CliError;
pub use pipeline::{run_pipeline, PipelineOutcome};
pub use spec::{parse_spec, PipelineSpec};
