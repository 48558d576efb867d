//! Run manifests: the effective configuration, its hash, and versions.
//!
//! The worker count is deliberately absent so that manifests, like every other
//! output, do not depend on parallelism.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::model::MODEL_SCHEMA_VERSION;
use crate::FormatError;

#[derive(Debug, Serialize)]
pub struct Versions {
    pub gazeprint: &'static str,
    pub model_schema: u32,
}

pub const VERSIONS: Versions = Versions {
    gazeprint: env!("CARGO_PKG_VERSION"),
    model_schema: MODEL_SCHEMA_VERSION,
};

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_sha256: String,
    pub seed: u64,
    pub versions: &'a Versions,
    pub config: &'a C,
}

pub fn config_hash<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub fn manifest<'a, C: Serialize>(command: &'a str, seed: u64, config: &'a C) -> Manifest<'a, C> {
    Manifest {
        command,
        config_sha256: config_hash(config),
        seed,
        versions: &VERSIONS,
        config,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    fs::write(path, s).map_err(|e| FormatError::io(path, e))
}
