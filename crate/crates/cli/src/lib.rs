//! Command-line experiments on the semi-discrete directed landscape.

pub mod commands;
pub mod config;
pub mod identities;
pub mod output;
pub mod svg;
