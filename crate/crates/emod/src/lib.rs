//! File-based pipeline around `emod-core`: configuration, artifact formats,
//! parallel stage execution and the `emod` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod svg;
