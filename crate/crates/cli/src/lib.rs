//! Experiment presets, configuration and output writing for the `esrsim`
//! command-line tool.

pub mod config;
pub mod experiments;
