//! File formats and helpers behind the `april` binary.

pub mod format;
pub mod ingest;
pub mod report;
