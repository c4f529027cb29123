//! Benchmark harness: synthetic datasets, classical baselines, and the
//! end-to-end collect → train → search → evaluate pipeline behind the
//! `fsns` command-line binary.

pub mod error;
pub mod baselines;
pub mod config;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod synth;

pub use error::{BenchError, Result};
