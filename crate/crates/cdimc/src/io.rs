//! Dataset directories and label files.
//!
//! A dataset directory holds `view_1.csv` ... `view_l.csv` (one sample per
//! row, `NaN` for missing instances), an optional `mask.csv` (one row of 0/1
//! per sample, one column per view) and an optional `labels.csv` (one integer
//! per row). No headers, `.` decimals, LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cdimc_core::dataset::MultiViewDataset;
use cdimc_core::Matrix;

use crate::error::{CliError, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
}

fn parse_view(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in lines(&text) {
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>().map_err(|_| CliError::at(path, no, format!("cannot parse {tok:?} as a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::at(path, no, format!("row has {} columns, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Format(format!("{}: no samples", path.display())));
    }
    let cols = rows[0].len();
    Ok(Matrix::from_vec(rows.len(), cols, rows.concat())?)
}

fn parse_mask(path: &Path, n: usize, l: usize) -> Result<Vec<Vec<bool>>> {
    let text = read(path)?;
    let mut masks = vec![Vec::with_capacity(n); l];
    for (no, line) in lines(&text) {
        let bits: Vec<&str> = line.split(',').map(str::trim).collect();
        if bits.len() != l {
            return Err(CliError::at(path, no, format!("row has {} columns, expected one per view ({l})", bits.len())));
        }
        for (v, bit) in bits.iter().enumerate() {
            masks[v].push(match *bit {
                "1" => true,
                "0" => false,
                other => return Err(CliError::at(path, no, format!("mask entries must be 0 or 1, got {other:?}"))),
            });
        }
    }
    if masks[0].len() != n {
        return Err(CliError::Format(format!("{}: {} rows for {} samples", path.display(), masks[0].len(), n)));
    }
    Ok(masks)
}

/// Reads a label file: either one integer per line, or `index,cluster` lines
/// (as written by [`write_assignments`]) covering indices `0..n` once each.
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut plain = Vec::new();
    let mut indexed = Vec::new();
    for (no, line) in lines(&text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| CliError::at(path, no, format!("{s:?} is not a non-negative integer")));
        match fields.as_slice() {
            [c] => plain.push(num(c)?),
            [i, c] => indexed.push((num(i)?, num(c)?, no)),
            _ => return Err(CliError::at(path, no, "expected `cluster` or `index,cluster`")),
        }
        if !plain.is_empty() && !indexed.is_empty() {
            return Err(CliError::at(path, no, "mixes `cluster` and `index,cluster` lines"));
        }
    }
    if indexed.is_empty() {
        return Ok(plain);
    }
    let n = indexed.len();
    let mut out = vec![None; n];
    for (i, c, no) in indexed {
        match out.get_mut(i) {
            Some(slot @ None) => *slot = Some(c),
            Some(Some(_)) => return Err(CliError::at(path, no, format!("index {i} appears twice"))),
            None => return Err(CliError::at(path, no, format!("index {i} out of range for {n} rows"))),
        }
    }
    Ok(out.into_iter().map(|c| c.expect("every index filled")).collect())
}

pub fn view_path(dir: &Path, v: usize) -> PathBuf {
    dir.join(format!("view_{}.csv", v + 1))
}

pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let mut views = Vec::new();
    while view_path(dir, views.len()).exists() {
        views.push(parse_view(&view_path(dir, views.len()))?);
    }
    if views.is_empty() {
        return Err(CliError::Format(format!("{}: no view_1.csv found", dir.display())));
    }
    let n = views[0].rows();
    for (v, x) in views.iter().enumerate() {
        if x.rows() != n {
            return Err(CliError::Format(format!(
                "{}: {} rows, view_1.csv has {}",
                view_path(dir, v).display(),
                x.rows(),
                n
            )));
        }
    }
    let mask_path = dir.join("mask.csv");
    let masks =
        if mask_path.exists() { parse_mask(&mask_path, n, views.len())? } else { vec![vec![true; n]; views.len()] };
    for (v, (x, m)) in views.iter().zip(&masks).enumerate() {
        for i in 0..n {
            if m[i] && x.row(i).iter().any(|a| !a.is_finite()) {
                return Err(CliError::at(&view_path(dir, v), i + 1, "non-finite value in an available instance"));
            }
        }
    }
    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.exists() { Some(load_labels(&labels_path)?) } else { None };
    if let Some(l) = &labels {
        if l.len() != n {
            return Err(CliError::Format(format!("{}: {} labels for {} samples", labels_path.display(), l.len(), n)));
        }
    }
    Ok(MultiViewDataset::new(views, masks, labels)?)
}

fn format_matrix(x: &Matrix) -> String {
    let mut out = String::new();
    for row in x.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn mask_csv(ds: &MultiViewDataset) -> String {
    let mut out = String::new();
    for i in 0..ds.n() {
        let bits: Vec<&str> = ds.masks().iter().map(|m| if m[i] { "1" } else { "0" }).collect();
        out.push_str(&bits.join(","));
        out.push('\n');
    }
    out
}

/// Writes every view, the mask and (if present) the labels.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for v in 0..ds.n_views() {
        write(&view_path(dir, v), &format_matrix(ds.view(v)))?;
    }
    write(&dir.join("mask.csv"), &mask_csv(ds))?;
    let labels_path = dir.join("labels.csv");
    match ds.labels() {
        Some(labels) => write(&labels_path, &labels.iter().map(|l| format!("{l}\n")).collect::<String>())?,
        None if labels_path.exists() => fs::remove_file(&labels_path).map_err(|e| CliError::io(&labels_path, e))?,
        None => {}
    }
    Ok(())
}

pub fn write_assignments(path: &Path, assignments: &[usize]) -> Result<()> {
    let text: String = assignments.iter().enumerate().map(|(i, c)| format!("{i},{c}\n")).collect();
    write(path, &text)
}
