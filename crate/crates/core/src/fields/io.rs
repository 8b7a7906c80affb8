//! Field persistence.
//!
//! A field `name` is stored as `name.bin`, little-endian `f64` samples in
//! grid storage order (complex fields interleave re, im), next to a
//! `name.json` sidecar carrying the grid and the sample kind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{ComplexField, ScalarField};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const LAYOUT: &str = "row_major_xyz_f64_le";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub grid: Grid,
    pub kind: SampleKind,
    pub layout: String,
    /// Number of stacked fields in a series payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
}

fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.bin")), dir.join(format!("{name}.json")))
}

fn encode(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(f64::to_le_bytes).collect()
}

fn decode(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("payload length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn write_pair(dir: &Path, name: &str, header: &FieldHeader, payload: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (bin, json) = paths(dir, name);
    fs::write(bin, payload)?;
    fs::write(json, serde_json::to_vec_pretty(header)?)?;
    Ok(())
}

fn read_pair(dir: &Path, name: &str, kind: SampleKind) -> Result<(FieldHeader, Vec<f64>)> {
    let (bin, json) = paths(dir, name);
    let header: FieldHeader = serde_json::from_slice(&fs::read(&json)?)?;
    if header.kind != kind {
        return Err(Error::Format(format!("{}: expected {kind:?} samples", json.display())));
    }
    if header.layout != LAYOUT {
        return Err(Error::Format(format!("{}: unknown layout {}", json.display(), header.layout)));
    }
    let values = decode(&fs::read(bin)?)?;
    Ok((header, values))
}

pub fn write_scalar(dir: &Path, name: &str, field: &ScalarField) -> Result<()> {
    let header =
        FieldHeader { grid: field.grid().clone(), kind: SampleKind::Real, layout: LAYOUT.into(), slices: None };
    write_pair(dir, name, &header, &encode(field.values().iter().copied()))
}

pub fn read_scalar(dir: &Path, name: &str) -> Result<ScalarField> {
    let (header, values) = read_pair(dir, name, SampleKind::Real)?;
    if header.slices.is_some() {
        return Err(Error::Format(format!("{name}: is a series, not a single field")));
    }
    ScalarField::new(header.grid, values)
}

fn common_grid<'a>(mut grids: impl Iterator<Item = &'a Grid>) -> Result<Grid> {
    let first = grids.next().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?.clone();
    if grids.any(|g| *g != first) {
        return Err(Error::GridMismatch);
    }
    Ok(first)
}

fn split_series(header: &FieldHeader, values: Vec<f64>, per_node: usize, name: &str) -> Result<Vec<Vec<f64>>> {
    let slices = header.slices.ok_or_else(|| Error::Format(format!("{name}: not a series")))?;
    let chunk = header.grid.len() * per_node;
    if values.len() != slices * chunk {
        return Err(Error::LengthMismatch { expected: slices * chunk, got: values.len() });
    }
    Ok(values.chunks_exact(chunk.max(1)).map(<[f64]>::to_vec).collect())
}

/// Several fields on one grid stacked in one payload.
pub fn write_scalar_series(dir: &Path, name: &str, fields: &[ScalarField]) -> Result<()> {
    let grid = common_grid(fields.iter().map(ScalarField::grid))?;
    let header = FieldHeader { grid, kind: SampleKind::Real, layout: LAYOUT.into(), slices: Some(fields.len()) };
    write_pair(dir, name, &header, &encode(fields.iter().flat_map(|f| f.values().iter().copied())))
}

pub fn read_scalar_series(dir: &Path, name: &str) -> Result<Vec<ScalarField>> {
    let (header, values) = read_pair(dir, name, SampleKind::Real)?;
    split_series(&header, values, 1, name)?.into_iter().map(|v| ScalarField::new(header.grid.clone(), v)).collect()
}

pub fn write_complex_series(dir: &Path, name: &str, fields: &[ComplexField]) -> Result<()> {
    let grid = common_grid(fields.iter().map(ComplexField::grid))?;
    let header = FieldHeader { grid, kind: SampleKind::Complex, layout: LAYOUT.into(), slices: Some(fields.len()) };
    let payload = encode(fields.iter().flat_map(|f| f.values().iter().flat_map(|c| [c.re, c.im])));
    write_pair(dir, name, &header, &payload)
}

pub fn read_complex_series(dir: &Path, name: &str) -> Result<Vec<ComplexField>> {
    let (header, values) = read_pair(dir, name, SampleKind::Complex)?;
    split_series(&header, values, 2, name)?
        .into_iter()
        .map(|v| {
            ComplexField::new(header.grid.clone(), v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
        })
        .collect()
}

pub fn write_complex(dir: &Path, name: &str, field: &ComplexField) -> Result<()> {
    let header =
        FieldHeader { grid: field.grid().clone(), kind: SampleKind::Complex, layout: LAYOUT.into(), slices: None };
    let payload = encode(field.values().iter().flat_map(|c| [c.re, c.im]));
    write_pair(dir, name, &header, &payload)
}

pub fn read_complex(dir: &Path, name: &str) -> Result<ComplexField> {
    let (header, values) = read_pair(dir, name, SampleKind::Complex)?;
    if header.slices.is_some() {
        return Err(Error::Format(format!("{name}: is a series, not a single field")));
    }
    if values.len() % 2 != 0 {
        return Err(Error::Format(format!("{name}: odd number of complex components")));
    }
    let values = values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    ComplexField::new(header.grid, values)
}

/// CSV with one row per node: coordinates then value.
pub fn write_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    let dim = grid.dim();
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let axes = ["x", "y", "z"];
    writeln!(out, "{},value", axes[..dim].join(","))?;
    for (i, v) in field.values().iter().enumerate() {
        let x = grid.coords(i);
        for c in &x[..dim] {
            write!(out, "{c:.17e},")?;
        }
        writeln!(out, "{v:.17e}")?;
    }
    out.flush()?;
    Ok(())
}
