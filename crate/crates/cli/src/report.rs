//! JSON report documents.
//!
//! Objects serialize with sorted keys, and floats are written in shortest
//! round-trip form, so reports are stable, diffable and reload bit-exactly.

use std::path::Path;

use gar_core::graph::{NormalizedLaplacian, SpaceTag};
use gar_core::linalg::SymMatrix;
use gar_core::GarModel;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const TIMINGS_FILE: &str = "timings.json";

/// Fields shared by every report.
pub fn envelope(config: &RunConfig) -> Value {
    json!({
        "command": config.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "generator": gar_core::rng::GENERATOR,
        "config": config.values(),
    })
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Value {
    Value::from(m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

pub fn matrix_from_rows(v: &Value, what: &str, path: &Path) -> Result<DMatrix<f64>> {
    let bad = || malformed(path, format!("`{what}` is not a square numeric matrix"));
    let rows = v.as_array().ok_or_else(bad)?;
    let p = rows.len();
    let mut out = DMatrix::zeros(p, p);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().filter(|r| r.len() == p).ok_or_else(bad)?;
        for (j, x) in row.iter().enumerate() {
            out[(i, j)] = x.as_f64().ok_or_else(bad)?;
        }
    }
    Ok(out)
}

pub fn vector_from(v: &Value, what: &str, path: &Path) -> Result<DVector<f64>> {
    let bad = || malformed(path, format!("`{what}` is not a numeric array"));
    let xs = v.as_array().ok_or_else(bad)?;
    xs.iter().map(|x| x.as_f64().ok_or_else(bad)).collect::<Result<Vec<_>>>().map(DVector::from_vec)
}

pub fn number(v: &Value, what: &str, path: &Path) -> Result<f64> {
    v.as_f64().ok_or_else(|| malformed(path, format!("`{what}` is missing or not a number")))
}

pub fn model_json(model: &GarModel) -> Value {
    json!({
        "theta0": model.theta0,
        "v0": model.v0.as_slice(),
        "laplacian": matrix_rows(model.l()),
        "space": model.laplacian.tag.name(),
    })
}

/// Rebuild a model from [`model_json`] output.
pub fn model_from_json(v: &Value, path: &Path) -> Result<GarModel> {
    let theta0 = number(&v["theta0"], "model.theta0", path)?;
    let l: SymMatrix = matrix_from_rows(&v["laplacian"], "model.laplacian", path)?;
    let v0 = vector_from(&v["v0"], "model.v0", path)?;
    Ok(GarModel::new(theta0, NormalizedLaplacian { entries: l, tag: SpaceTag::Relaxed }, v0)?)
}

pub fn malformed(path: &Path, message: String) -> CliError {
    CliError::Report { path: path.into(), message }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports contain only JSON-representable values");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}
