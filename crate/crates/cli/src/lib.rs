//! Command-line driver for `edgebatch-core`: single-instance solves,
//! simulation sweeps, pruning benchmarks and oracle certification.

pub mod app;
pub mod bench;
pub mod certify;
pub mod error;
pub mod manifest;
pub mod solve;
pub mod sweep;

pub use app::run;
pub use error::CliError;
