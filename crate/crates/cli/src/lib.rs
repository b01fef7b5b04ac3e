//! Command implementations behind the `fovsearch` binary.

pub mod commands;
pub mod config;
