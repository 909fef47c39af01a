//! Benchmarking out-of-distribution supervisors across training checkpoints.

pub mod dataio;
pub mod metrics;
pub mod netengine;
pub mod supervisors;
pub mod harness;
