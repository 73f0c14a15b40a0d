//! Library surface of the command-line front end: configuration, artifact
//! serialization, CSV formats, and the experiment registry. The binary in
//! `main.rs` is a thin argument-parsing shell over these.

pub mod artifacts;
pub mod config;
pub mod csvio;
pub mod errors;
pub mod experiments;
pub mod fmtnum;
