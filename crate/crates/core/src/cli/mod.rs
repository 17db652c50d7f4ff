//! File formats and subcommand drivers for the `ablacert` binary.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod report;
pub mod synth;
