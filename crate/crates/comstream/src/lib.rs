//! File formats, stream ingestion, the remote embedding client and the
//! batch driver behind the `comstream` binary.

pub mod config_file;
pub mod formats;
pub mod ingest;
pub mod remote;
pub mod run;
pub mod synth;
