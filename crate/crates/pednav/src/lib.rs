//! Command-line tools, configuration and the console streaming service.

pub mod cli;
pub mod config;
pub mod service;
pub mod wire;
