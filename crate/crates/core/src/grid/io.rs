//! On-disk form of a value field: `manifest.json` plus one CSV per stored
//! layer (`t,x,value`), all numbers written with 17 significant digits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FieldMeta, Grid, ValueField};
use crate::error::{Error, Result};
use crate::numeric::fmt17;

pub const MANIFEST_FILE: &str = "manifest.json";
const V0_FILE: &str = "v0.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldManifest {
    pub spec_hash: String,
    pub n_t: usize,
    pub m: usize,
    pub n_x: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub delta: f64,
    pub scheme: String,
    pub obstacle_tol: f64,
    pub v0_file: String,
    pub layer_files: Vec<String>,
}

fn layer_file(j: usize) -> String {
    format!("layer_r{j:04}.csv")
}

fn write_layer(path: &Path, grid: &Grid, rows: impl Fn(usize) -> Vec<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "t,x,value")?;
    for k in 0..=grid.n_t {
        let t = fmt17(grid.t(k));
        for (i, v) in rows(k).into_iter().enumerate() {
            writeln!(out, "{},{},{}", t, fmt17(grid.x(i)), fmt17(v))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_field(field: &ValueField, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let g = &field.grid;
    let layer_files: Vec<String> = (0..g.m).map(layer_file).collect();
    let manifest = FieldManifest {
        spec_hash: field.meta.spec_hash.clone(),
        n_t: g.n_t,
        m: g.m,
        n_x: g.n_x,
        x_lo: g.x_lo,
        x_hi: g.x_hi,
        horizon: g.horizon,
        delta: g.delta,
        scheme: field.meta.scheme.clone(),
        obstacle_tol: field.meta.obstacle_tol,
        v0_file: V0_FILE.to_string(),
        layer_files: layer_files.clone(),
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    write_layer(&dir.join(V0_FILE), g, |k| field.free(k).to_vec())?;
    for (j, name) in layer_files.iter().enumerate() {
        write_layer(&dir.join(name), g, |k| field.lag(k, j).to_vec())?;
    }
    Ok(())
}

fn read_layer(path: &Path, grid: &Grid) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,x,value") => {}
        other => {
            return Err(Error::Parse(format!(
                "{}: expected header `t,x,value`, found {other:?}",
                path.display()
            )))
        }
    }
    let expected = (grid.n_t + 1) * grid.nx_nodes();
    let mut values = Vec::with_capacity(expected);
    for (n, line) in lines.enumerate() {
        let v = line
            .rsplit(',')
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Parse(format!("{}: bad row {}: {line}", path.display(), n + 2))
            })?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "{}: expected {expected} rows, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

/// Loads a field written by [`save_field`]; a missing manifest or layer is
/// reported as [`Error::MissingArtifact`].
pub fn load_field(dir: &Path) -> Result<ValueField> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::MissingArtifact(manifest_path));
    }
    let manifest: FieldManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.layer_files.len() != manifest.m {
        return Err(Error::Parse(format!(
            "manifest lists {} layer files for m = {}",
            manifest.layer_files.len(),
            manifest.m
        )));
    }
    let grid = Grid {
        horizon: manifest.horizon,
        delta: manifest.delta,
        n_t: manifest.n_t,
        m: manifest.m,
        n_x: manifest.n_x,
        x_lo: manifest.x_lo,
        x_hi: manifest.x_hi,
    };
    let v0 = read_layer(&dir.join(&manifest.v0_file), &grid)?;
    let nx = grid.nx_nodes();
    let layers = manifest
        .layer_files
        .iter()
        .map(|f| read_layer(&dir.join(f), &grid))
        .collect::<Result<Vec<_>>>()?;
    let mut v_lag = vec![0.0; (grid.n_t + 1) * grid.m * nx];
    for (j, layer) in layers.iter().enumerate() {
        for k in 0..=grid.n_t {
            let dst = (k * grid.m + j) * nx;
            v_lag[dst..dst + nx].copy_from_slice(&layer[k * nx..(k + 1) * nx]);
        }
    }
    Ok(ValueField {
        grid,
        v0,
        v_lag,
        meta: FieldMeta {
            spec_hash: manifest.spec_hash,
            scheme: manifest.scheme,
            obstacle_tol: manifest.obstacle_tol,
        },
    })
}
