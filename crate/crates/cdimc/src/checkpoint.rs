//! Text checkpoints of network parameters.
//!
//! ```text
//! cdimc-checkpoint 1
//! dims 10 10
//! code_dim 3
//! hidden_width 1500
//! param 10 8
//! <10 lines of 8 space-separated values>
//! param 1 8
//! ...
//! ```
//!
//! Parameters appear in layout order (per view: encoder weight/bias pairs,
//! then decoder weight/bias pairs). Values use Rust's shortest round-trip
//! formatting, so loading reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cdimc_core::pretrain::MultiViewAutoencoder;
use cdimc_core::Matrix;

use crate::error::{CliError, Result};

const MAGIC: &str = "cdimc-checkpoint";
const VERSION: u32 = 1;

pub fn to_text(model: &MultiViewAutoencoder) -> String {
    let mut out = String::new();
    let dims: Vec<String> = model.dims().iter().map(usize::to_string).collect();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(out, "dims {}", dims.join(" ")).unwrap();
    writeln!(out, "code_dim {}", model.code_dim()).unwrap();
    writeln!(out, "hidden_width {}", model.hidden_width()).unwrap();
    for p in model.params().values() {
        writeln!(out, "param {} {}", p.rows(), p.cols()).unwrap();
        for row in p.iter_rows() {
            let vals: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", vals.join(" ")).unwrap();
        }
    }
    out
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    origin: &'a Path,
}

impl<'a> Cursor<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self.lines.get(self.pos).copied();
        self.pos += 1;
        line.ok_or_else(|| CliError::Format(format!("{}: ends before {what}", self.origin.display())))
    }

    fn done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    fn bad(&self, no: usize, msg: impl std::fmt::Display) -> CliError {
        CliError::at(self.origin, no, msg)
    }

    /// A `name n1 n2 ...` line with exactly `count` values.
    fn field(&mut self, name: &str, count: usize) -> Result<Vec<usize>> {
        let (no, line) = self.next(name)?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(name) {
            return Err(self.bad(no, format!("expected `{name}`")));
        }
        let vals = toks
            .map(|t| t.parse::<usize>().map_err(|_| self.bad(no, format!("{t:?} is not a count"))))
            .collect::<Result<Vec<usize>>>()?;
        if count > 0 && vals.len() != count {
            return Err(self.bad(no, format!("`{name}` takes {count} value(s)")));
        }
        Ok(vals)
    }
}

pub fn from_text(text: &str, origin: &Path) -> Result<MultiViewAutoencoder> {
    let lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()).collect();
    let mut cur = Cursor { lines, pos: 0, origin };
    let (no, head) = cur.next("the header")?;
    if head.trim() != format!("{MAGIC} {VERSION}") {
        return Err(cur.bad(no, format!("expected `{MAGIC} {VERSION}`, found {head:?}")));
    }
    let dims = cur.field("dims", 0)?;
    let code_dim = cur.field("code_dim", 1)?[0];
    let hidden_width = cur.field("hidden_width", 1)?[0];

    let mut params = Vec::new();
    while !cur.done() {
        let shape = cur.field("param", 2)?;
        let (rows, cols) = (shape[0], shape[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, line) = cur.next("a parameter row")?;
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| cur.bad(no, format!("cannot parse {t:?} as a number"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != cols {
                return Err(cur.bad(no, format!("row has {} values, expected {cols}", row.len())));
            }
            data.extend(row);
        }
        params.push(Matrix::from_vec(rows, cols, data)?);
    }
    Ok(MultiViewAutoencoder::from_parameters(&dims, code_dim, hidden_width, params)?)
}

pub fn save(model: &MultiViewAutoencoder, path: &Path) -> Result<()> {
    fs::write(path, to_text(model)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<MultiViewAutoencoder> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_text(&text, path)
}
