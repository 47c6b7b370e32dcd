//! Verification suites behind the `ultrametriclab` binary. A suite runs a
//! fixed family of checks, each reporting its measured error against a
//! tolerance, and collects plot-ready CSV tables.

// `!(x > 0.0)` is the intended spelling: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod suites;
pub mod tables;

pub use config::{GroupChoice, Suite, SuiteConfig};
pub use report::{CheckResult, Report};
pub use suites::run_suite;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ultrametriclab::error::Error),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("config file: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
