//! Command-line driver for the proof search: file formats, the remote model
//! client, batch evaluation with run manifests, and tree rendering.

pub mod batch;
pub mod cli;
pub mod config;
pub mod io;
pub mod remote;
pub mod render;
