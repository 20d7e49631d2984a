//! CSV and JSON storage for matrices, ragged tensors and dense tensors.
//!
//! * matrix: one CSV file with a header row `c0,c1,...`; readers also accept
//!   header-less files.
//! * ragged tensor: a directory with `slice_000.csv`, `slice_001.csv`, ... and
//!   `manifest.json` holding `{"I1": rows, "J": [widths]}`.
//! * dense tensor: a directory with the mode-1 unfolding in `unfolded.csv`
//!   and `manifest.json` holding `{"shape": [I, J, K]}`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CmtfError, Result};
use crate::tensor::{DataTensor, DenseTensor3, RaggedTensor};

pub const MANIFEST: &str = "manifest.json";
pub const UNFOLDED: &str = "unfolded.csv";

#[derive(Debug, Serialize, Deserialize)]
struct RaggedManifest {
    #[serde(rename = "I1")]
    rows: usize,
    #[serde(rename = "J")]
    widths: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DenseManifest {
    shape: [usize; 3],
}

pub fn slice_file_name(k: usize) -> String {
    format!("slice_{k:03}.csv")
}

/// Formats a float so that it parses back to the same value.
fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|c| format!("c{c}")).collect();
    write_table_csv(path, &header, m)
}

/// Writes `m` under the given column names.
pub fn write_table_csv(path: &Path, header: &[String], m: &Array2<f64>) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(CmtfError::Dimension(format!(
            "{} column names for {} columns",
            header.len(),
            m.ncols()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CmtfError::io(path, e))?;
    w.write_record(header).map_err(|e| CmtfError::io(path, e))?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| fmt_value(*v)))
            .map_err(|e| CmtfError::io(path, e))?;
    }
    w.flush().map_err(|e| CmtfError::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CmtfError::io(path, e))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CmtfError::io(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let parsed = match parsed {
            Ok(p) => p,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(CmtfError::io(path, format!("line {}: {e}", line + 1))),
        };
        match cols {
            None => cols = Some(parsed.len()),
            Some(c) if c != parsed.len() => {
                return Err(CmtfError::io(
                    path,
                    format!("line {}: {} fields, expected {c}", line + 1, parsed.len()),
                ))
            }
            _ => {}
        }
        values.extend(parsed);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CmtfError::io(path, "no numeric rows"))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| CmtfError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CmtfError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CmtfError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CmtfError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CmtfError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CmtfError::io(dir, e))
}

pub fn write_ragged(dir: &Path, x: &RaggedTensor) -> Result<()> {
    create_dir(dir)?;
    for (k, s) in x.slices().iter().enumerate() {
        write_matrix_csv(&dir.join(slice_file_name(k)), s)?;
    }
    write_json(
        &dir.join(MANIFEST),
        &RaggedManifest {
            rows: x.n_rows(),
            widths: x.slice_widths(),
        },
    )
}

pub fn read_ragged(dir: &Path) -> Result<RaggedTensor> {
    let manifest: RaggedManifest = read_json(&dir.join(MANIFEST))?;
    let mut slices = Vec::with_capacity(manifest.widths.len());
    for (k, &j) in manifest.widths.iter().enumerate() {
        let path = dir.join(slice_file_name(k));
        let s = read_matrix_csv(&path)?;
        if s.dim() != (manifest.rows, j) {
            return Err(CmtfError::Dimension(format!(
                "{}: slice is {:?}, manifest says ({}, {j})",
                path.display(),
                s.dim(),
                manifest.rows
            )));
        }
        slices.push(s);
    }
    RaggedTensor::new(slices)
}

pub fn write_dense(dir: &Path, x: &DenseTensor3) -> Result<()> {
    create_dir(dir)?;
    write_matrix_csv(&dir.join(UNFOLDED), &x.unfold_mode1())?;
    write_json(&dir.join(MANIFEST), &DenseManifest { shape: x.shape() })
}

pub fn read_dense(dir: &Path) -> Result<DenseTensor3> {
    let manifest: DenseManifest = read_json(&dir.join(MANIFEST))?;
    let unfolded = read_matrix_csv(&dir.join(UNFOLDED))?;
    DenseTensor3::fold_mode1(&unfolded, manifest.shape)
}

/// Writes a dataset: a directory for tensors, a `.csv` file for matrices.
/// Returns the path that [`read_data`] accepts.
pub fn write_data(base: &Path, name: &str, data: &DataTensor) -> Result<PathBuf> {
    match data {
        DataTensor::Ragged(x) => {
            let dir = base.join(name);
            write_ragged(&dir, x)?;
            Ok(dir)
        }
        DataTensor::Dense(x) => {
            let dir = base.join(name);
            write_dense(&dir, x)?;
            Ok(dir)
        }
        DataTensor::Matrix(y) => {
            create_dir(base)?;
            let path = base.join(format!("{name}.csv"));
            write_matrix_csv(&path, y)?;
            Ok(path)
        }
    }
}

/// Kind of data file expected by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Ragged,
    Dense,
    Matrix,
}

pub fn read_data(path: &Path, kind: DataKind) -> Result<DataTensor> {
    if !path.exists() {
        return Err(CmtfError::io(path, "no such file or directory"));
    }
    Ok(match kind {
        DataKind::Ragged => DataTensor::Ragged(read_ragged(path)?),
        DataKind::Dense => DataTensor::Dense(read_dense(path)?),
        DataKind::Matrix => DataTensor::Matrix(read_matrix_csv(path)?),
    })
}
