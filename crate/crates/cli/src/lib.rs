//! Command implementations behind the `rllim` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod output;
pub mod subgroup;
