//! Config-driven experiments on top of `ancsim-core`.

pub mod config;
pub mod experiments;

pub use config::{Config, ConfigError, Mode};
