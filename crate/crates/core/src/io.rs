//! CSV input for H and V files and their block manifests.
//!
//! H is either `x,z,y` (already reduced) or `y,<covariates…>` with a manifest
//! `{"x_block": [...], "z_block": [...]}` naming the columns of each block. V
//! is `x,y` or `y,<covariates…>` with a manifest holding `x_block`.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::application::{HData, VData};
use crate::error::{Error, Result};
use crate::reduce::{CovariateBlock, RawH, RawV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockManifest {
    pub x_block: Vec<String>,
    #[serde(default)]
    pub z_block: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HInput {
    Reduced(HData),
    Raw(RawH),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VInput {
    Reduced(VData),
    Raw(RawV),
}

/// Header and numeric rows of a CSV file, with row/column diagnostics on bad cells.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(reader: R, label: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().any(|h| h.is_empty()) {
        return Err(Error::Schema(format!("{label}: header has an empty column name")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("{label}: data row {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .zip(&header)
            .map(|(cell, col)| {
                cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Schema(format!(
                        "{label}: data row {}, column {col}: cannot read {cell:?} as a finite number",
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{label}: no data rows")));
    }
    Ok(Table { header, rows })
}

impl Table {
    fn column(&self, name: &str) -> Vec<f64> {
        let j = self.header.iter().position(|h| h == name).expect("checked column");
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn block(&self, names: &[String], label: &str) -> Result<CovariateBlock> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::Schema(format!("{label}: manifest column {n} is not in the header")))
            })
            .collect::<Result<_>>()?;
        let values = Array2::from_shape_fn((self.rows.len(), idx.len()), |(i, j)| self.rows[i][idx[j]]);
        CovariateBlock::new(values, names.to_vec())
    }

    fn binary_y(&self, label: &str) -> Result<Vec<f64>> {
        let y = self.column("y");
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Schema(format!("{label}: data row {}, column y: {} is not 0 or 1", i + 1, y[i])));
        }
        Ok(y)
    }
}

pub fn read_manifest(path: &Path) -> Result<BlockManifest> {
    let m: BlockManifest =
        serde_json::from_reader(File::open(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if m.x_block.is_empty() {
        return Err(Error::Schema(format!("{}: x_block is empty", path.display())));
    }
    Ok(m)
}

pub fn parse_h<R: Read>(reader: R, manifest: Option<&BlockManifest>, label: &str) -> Result<HInput> {
    let t = read_table(reader, label)?;
    if t.header == ["x", "z", "y"] {
        return Ok(HInput::Reduced(HData { x: t.column("x"), z: t.column("z"), y: t.binary_y(label)? }));
    }
    if t.header[0] != "y" {
        return Err(Error::Schema(format!(
            "{label}: header must be x,z,y or start with y, found {}",
            t.header.join(",")
        )));
    }
    let m = manifest.ok_or_else(|| Error::Schema(format!("{label}: a covariate file needs a block manifest")))?;
    if m.z_block.is_empty() {
        return Err(Error::Schema(format!("{label}: manifest z_block is empty")));
    }
    Ok(HInput::Raw(RawH {
        x_block: t.block(&m.x_block, label)?,
        z_block: t.block(&m.z_block, label)?,
        y: t.binary_y(label)?,
    }))
}

pub fn parse_v<R: Read>(reader: R, manifest: Option<&BlockManifest>, label: &str) -> Result<VInput> {
    let t = read_table(reader, label)?;
    if t.header == ["x", "y"] {
        return Ok(VInput::Reduced(VData { x: t.column("x"), y: t.binary_y(label)? }));
    }
    if t.header[0] != "y" {
        return Err(Error::Schema(format!(
            "{label}: header must be x,y or start with y, found {}",
            t.header.join(",")
        )));
    }
    let m = manifest.ok_or_else(|| Error::Schema(format!("{label}: a covariate file needs a block manifest")))?;
    Ok(VInput::Raw(RawV { x_block: t.block(&m.x_block, label)?, y: t.binary_y(label)? }))
}

pub fn read_h(path: &Path, manifest: Option<&Path>) -> Result<HInput> {
    let m = manifest.map(read_manifest).transpose()?;
    parse_h(File::open(path)?, m.as_ref(), &path.display().to_string())
}

pub fn read_v(path: &Path, manifest: Option<&Path>) -> Result<VInput> {
    let m = manifest.map(read_manifest).transpose()?;
    parse_v(File::open(path)?, m.as_ref(), &path.display().to_string())
}

/// Write rows of numbers under `header`.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let n = columns.first().map_or(0, |c| c.len());
    for i in 0..n {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_h() {
        let h = parse_h("x,z,y\n0.1,0.2,1\n0.5,0.9,0\n".as_bytes(), None, "h").unwrap();
        assert_eq!(h, HInput::Reduced(HData { x: vec![0.1, 0.5], z: vec![0.2, 0.9], y: vec![1.0, 0.0] }));
    }

    #[test]
    fn raw_h_with_manifest() {
        let m = BlockManifest { x_block: vec!["a".into(), "b".into()], z_block: vec!["c".into()] };
        let h = parse_h("y,a,b,c\n1,1,2,3\n0,4,5,6\n".as_bytes(), Some(&m), "h").unwrap();
        let HInput::Raw(raw) = h else { panic!("expected raw input") };
        assert_eq!(raw.x_block.values.row(1).to_vec(), vec![4.0, 5.0]);
        assert_eq!(raw.z_block.values.column(0).to_vec(), vec![3.0, 6.0]);
    }

    #[test]
    fn schema_errors_name_row_and_column() {
        let e = parse_h("x,z,y\n0.1,0.2,1\n0.5,oops,0\n".as_bytes(), None, "h.csv").unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::Schema(_)));
        assert!(msg.contains("row 2") && msg.contains("column z"), "{msg}");
        let e = parse_v("x,y\n0.1,2\n".as_bytes(), None, "v.csv").unwrap_err();
        assert!(e.to_string().contains("column y"));
        assert!(matches!(parse_v("a,b\n1,2\n".as_bytes(), None, "v"), Err(Error::Schema(_))));
        assert!(matches!(parse_h("y,a\n1,2\n".as_bytes(), None, "h"), Err(Error::Schema(_))));
        let m = BlockManifest { x_block: vec!["q".into()], z_block: vec![] };
        assert!(matches!(parse_v("y,a\n1,2\n".as_bytes(), Some(&m), "v"), Err(Error::Schema(_))));
    }
}
