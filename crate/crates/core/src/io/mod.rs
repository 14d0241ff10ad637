//! Configuration files, binary snapshots and the diagnostics CSV.

pub mod config;
pub mod diagnostics;
pub mod snapshot;
