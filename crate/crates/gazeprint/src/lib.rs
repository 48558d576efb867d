//! File formats, parallel orchestration and the command line for
//! [`gazeprint_core`].
//!
//! Corpora are JSONL ([`jsonl`]), reader models are versioned JSON
//! ([`model`]), tabular outputs are CSV ([`export`]). [`commands`] holds the
//! `synth`, `train`, `identify`, `eval` and `export-density` commands that the
//! binary dispatches to.

use std::path::Path;

pub use gazeprint_core as core;

pub mod commands;
pub mod config;
pub mod export;
pub mod jsonl;
pub mod manifest;
pub mod model;
pub mod pipeline;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    Model { path: String, message: String },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
