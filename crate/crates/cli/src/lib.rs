//! File formats and commands for the `microctl` scenario runner.

pub mod commands;
pub mod scenario;
pub mod tables;
pub mod trace;
