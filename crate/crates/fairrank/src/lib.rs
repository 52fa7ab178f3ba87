//! Dataset ingestion, file formats, experiment harness and reports built on
//! [`fairrank_core`].

pub mod bundle;
pub mod harness;
pub mod ingest;
pub mod io;
pub mod report;

pub use fairrank_core as core;
