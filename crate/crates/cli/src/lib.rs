//! Command-line pipelines over `arnold-stab-core`: configuration, CSV and SVG
//! output, and the acceptance suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;
