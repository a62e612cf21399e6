//! Field files: CSV grids and plain-text graymaps.
//!
//! CSV layout: a header line `nx,ny,h`, then `ny` rows of `nx` values, row
//! `j` holding nodes with `y` index `j` (ascending). Values use the shortest
//! decimal form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::discrete_ops::ScalarField;
use crate::grid_domain::GridDomain;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed field file: {reason}")]
    Format { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

pub fn field_csv(u: &ScalarField) -> String {
    let d = u.domain();
    let mut out = format!("{},{},{}\n", d.nx(), d.ny(), d.h());
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            if i > 0 {
                out.push(',');
            }
            let p = d.index(i, j);
            let v = if d.is_interior(p) { u.get(p) } else { 0.0 };
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn emit_field(u: &ScalarField, path: &Path) -> Result<(), OutputError> {
    fs::write(path, field_csv(u)).map_err(io_err(path))
}

/// Raw contents of a field CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

impl FieldGrid {
    /// Attaches the values to a domain with matching grid dimensions.
    pub fn into_field(self, domain: &Arc<GridDomain>) -> crate::Result<ScalarField> {
        if domain.nx() != self.nx || domain.ny() != self.ny || domain.h() != self.h {
            return Err(crate::Error::DomainMismatch);
        }
        ScalarField::from_values(domain, self.values)
    }
}

pub fn parse_field_csv(text: &str, path: &Path) -> Result<FieldGrid, OutputError> {
    let bad = |reason: String| OutputError::Format { path: path.to_path_buf(), reason };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 3 {
        return Err(bad(format!("header `{header}` is not nx,ny,h")));
    }
    let nx: usize = parts[0].parse().map_err(|e| bad(format!("nx: {e}")))?;
    let ny: usize = parts[1].parse().map_err(|e| bad(format!("ny: {e}")))?;
    let h: f64 = parts[2].parse().map_err(|e| bad(format!("h: {e}")))?;
    let mut values = Vec::with_capacity(nx * ny);
    for (j, line) in lines.enumerate() {
        if j >= ny {
            return Err(bad("more rows than ny".into()));
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {j}: {e}")))?;
        if row.len() != nx {
            return Err(bad(format!("row {j} has {} values, expected {nx}", row.len())));
        }
        values.extend(row);
    }
    if values.len() != nx * ny {
        return Err(bad(format!("expected {ny} rows")));
    }
    Ok(FieldGrid { nx, ny, h, values })
}

pub fn read_field(path: &Path) -> Result<FieldGrid, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_field_csv(&text, path)
}

/// Text graymap (`P2`), maxval 255, scaled by the largest magnitude; rows run
/// top (largest `y`) to bottom.
pub fn field_pgm(u: &ScalarField) -> String {
    let d = u.domain();
    let max = u.max_abs();
    let mut out = format!("P2\n{} {}\n255\n", d.nx(), d.ny());
    for j in (0..d.ny()).rev() {
        for i in 0..d.nx() {
            if i > 0 {
                out.push(' ');
            }
            let v = u.get(d.index(i, j));
            let px = if max > 0.0 { (255.0 * v / max).round().clamp(0.0, 255.0) as u8 } else { 0 };
            write!(out, "{px}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn emit_image(u: &ScalarField, path: &Path) -> Result<(), OutputError> {
    fs::write(path, field_pgm(u)).map_err(io_err(path))
}
