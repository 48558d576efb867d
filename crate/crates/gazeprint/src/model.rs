//! Versioned JSON model files, one reader per file.
//!
//! Grids are stored as their defining data (bounds, node count, observation
//! points) and rebuilt on load; `g` is stored per grid point. Floats are
//! written with round-trip precision, so loading reproduces every field
//! exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gazeprint_core::density::{SemiparametricDensity, SupportGrid};
use gazeprint_core::gamma::GammaNatural;
use gazeprint_core::reader::{DensityRole, ReaderModel, SaccadeTypeProbs};
use serde::{Deserialize, Serialize};

use crate::FormatError;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    reader_id: String,
    /// Refixation, next word, forward skip, regression.
    pi: [f64; 4],
    mu: f64,
    densities: BTreeMap<String, DensityRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityRecord {
    eta: [f64; 2],
    grid: GridRecord,
    g: Vec<f64>,
    fallback: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRecord {
    low: f64,
    high: f64,
    quadrature_count: usize,
    observations: Vec<f64>,
}

fn to_record(model: &ReaderModel) -> ModelFile {
    let densities = DensityRole::ALL
        .iter()
        .map(|&role| {
            let d = model.density(role);
            let grid = d.grid();
            let rec = DensityRecord {
                eta: [d.eta().eta1, d.eta().eta2],
                grid: GridRecord {
                    low: grid.low(),
                    high: grid.high(),
                    quadrature_count: grid.quadrature_count(),
                    observations: grid.observations().to_vec(),
                },
                g: d.g_values().to_vec(),
                fallback: model.fallback[role.index()],
            };
            (role.name().to_string(), rec)
        })
        .collect();
    ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        reader_id: model.reader_id.clone(),
        pi: model.pi.as_array(),
        mu: model.mu,
        densities,
    }
}

pub fn format_model(model: &ReaderModel) -> String {
    let mut s = serde_json::to_string_pretty(&to_record(model)).expect("model records serialize");
    s.push('\n');
    s
}

/// Parses a model file; `source` only labels error messages.
pub fn parse_model(source: &str, content: &str) -> Result<ReaderModel, FormatError> {
    let corrupt = |message: String| FormatError::Model {
        path: source.to_string(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(content).map_err(|e| corrupt(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(MODEL_SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(corrupt(format!(
                "schema version {v} is not supported (expected {MODEL_SCHEMA_VERSION})"
            )))
        }
        None => return Err(corrupt("missing schema_version".into())),
    }
    let mut file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if let Some(name) = file.densities.keys().find(|k| DensityRole::from_name(k).is_none()) {
        return Err(corrupt(format!("unknown density role {name}")));
    }
    let mut densities = Vec::with_capacity(DensityRole::ALL.len());
    let mut fallback = [false; 11];
    for role in DensityRole::ALL {
        let rec = file
            .densities
            .remove(role.name())
            .ok_or_else(|| corrupt(format!("missing density role {}", role.name())))?;
        let at_role = |e: gazeprint_core::Error| corrupt(format!("density {}: {e}", role.name()));
        let grid = SupportGrid::new(rec.grid.observations, rec.grid.low, rec.grid.high, rec.grid.quadrature_count)
            .map_err(at_role)?;
        let eta = GammaNatural::new(rec.eta[0], rec.eta[1]).map_err(at_role)?;
        densities.push(SemiparametricDensity::new(eta, Arc::new(grid), rec.g).map_err(at_role)?);
        fallback[role.index()] = rec.fallback;
    }
    let pi = SaccadeTypeProbs::new(file.pi).map_err(|e| corrupt(e.to_string()))?;
    ReaderModel::new(file.reader_id, pi, file.mu, densities, fallback).map_err(|e| corrupt(e.to_string()))
}

pub fn save_model(path: &Path, model: &ReaderModel) -> Result<(), FormatError> {
    fs::write(path, format_model(model)).map_err(|e| FormatError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ReaderModel, FormatError> {
    let content = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_model(&path.display().to_string(), &content)
}

/// File name of a reader's model inside a models directory.
pub fn model_path(dir: &Path, reader_id: &str) -> PathBuf {
    dir.join(format!("{reader_id}.json"))
}

/// Every `*.json` model in `dir`, ordered by reader id.
pub fn load_model_dir(dir: &Path) -> Result<Vec<ReaderModel>, FormatError> {
    let entries = fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| FormatError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            paths.push(path);
        }
    }
    let mut models = paths.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    if models.is_empty() {
        return Err(FormatError::Model {
            path: dir.display().to_string(),
            message: "no model files found".into(),
        });
    }
    models.sort_by(|a, b| a.reader_id.cmp(&b.reader_id));
    Ok(models)
}
