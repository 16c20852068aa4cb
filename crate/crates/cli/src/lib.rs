//! Staged batch pipeline: data retrieval, posterior sampling, structural
//! identification and report tables, with on-disk artifacts between stages.

pub mod config;
pub mod error;
pub mod stages;
pub mod table;

pub use config::{Overrides, Run, RunConfig};
pub use error::{Error, Result};
