//! Configuration, verification suites and report emission behind the `lab` binary.

pub mod commands;
pub mod config;
pub mod report;
pub mod suites;
pub mod svg;
