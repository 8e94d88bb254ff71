//! Library half of the `ncde` binary, exposed for integration tests.

pub mod commands;
pub mod config;
