//! Files, reports, threads and the `pivots` command line on top of
//! `pivots-core`.

pub mod atlas_file;
pub mod cli;
pub mod error;
pub mod meta;
pub mod parallel;
pub mod report;
pub mod weights;

pub use error::{Result, ToolError};
