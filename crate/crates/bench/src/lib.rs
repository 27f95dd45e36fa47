//! Benchmark-only crate; re-exports the criterion API for its bench
//! targets.

pub use criterion;
