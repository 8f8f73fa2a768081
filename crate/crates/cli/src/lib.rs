//! Library half of the `sphereqc` command-line tool.

pub mod commands;
pub mod config;
pub mod register;
pub mod report;
