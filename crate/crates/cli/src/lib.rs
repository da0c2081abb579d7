//! Library surface of the command-line tool, split out so the integration
//! tests can drive the pieces directly.

pub mod config;
pub mod error;
pub mod groups;
pub mod ingest;
pub mod output;
pub mod preprocess;
pub mod report;
