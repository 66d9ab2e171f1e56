//! Plain-text parameter files.
//!
//! ```text
//! #SHG-PARAMS v1
//! target <mean> <std>
//! matrix <name> <rows> <cols>
//! <row 0 values>
//! ...
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::Model;
use crate::error::{Error, Result};

const MAGIC: &str = "#SHG-PARAMS v1";

pub fn format_checkpoint(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "target {:?} {:?}", model.target_mean, model.target_std);
    for id in model.store.ids() {
        let m = model.store.value(id);
        let _ = writeln!(
            out,
            "matrix {} {} {}",
            model.store.name(id),
            m.nrows(),
            m.ncols()
        );
        for row in m.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
    }
    out
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_checkpoint(model))?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {tok}")));
    }
    Ok(v)
}

/// Reads a checkpoint into a model built from the same configuration.
/// Every parameter must be present with its exact shape.
pub fn parse_checkpoint(model: &mut Model, text: &str) -> Result<()> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, other)) => {
            return Err(parse_err(n, format!("expected {MAGIC:?}, found {other:?}")))
        }
        None => return Err(parse_err(1, "empty checkpoint")),
    }
    let mut target = None;
    let mut matrices: HashMap<String, Array2<f64>> = HashMap::new();
    while let Some((n, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["target", mean, std] => target = Some((number(mean, n)?, number(std, n)?)),
            ["matrix", name, rows, cols] => {
                let rows: usize = rows.parse().map_err(|_| parse_err(n, "bad row count"))?;
                let cols: usize = cols.parse().map_err(|_| parse_err(n, "bad column count"))?;
                let mut m = Array2::zeros((rows, cols));
                for r in 0..rows {
                    let (rn, row) = lines.next().ok_or_else(|| {
                        parse_err(n, format!("matrix {name} ends after {r} rows"))
                    })?;
                    let vals: Vec<&str> = row.split_whitespace().collect();
                    if vals.len() != cols {
                        return Err(parse_err(
                            rn,
                            format!("expected {cols} values, found {}", vals.len()),
                        ));
                    }
                    for (c, tok) in vals.iter().enumerate() {
                        m[[r, c]] = number(tok, rn)?;
                    }
                }
                if matrices.insert(name.to_string(), m).is_some() {
                    return Err(parse_err(n, format!("duplicate matrix {name}")));
                }
            }
            _ => return Err(parse_err(n, format!("unrecognized line {line:?}"))),
        }
    }
    let (mean, std) = target.ok_or_else(|| parse_err(0, "missing target line"))?;
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let name = model.store.name(id).to_string();
        let m = matrices
            .remove(&name)
            .ok_or_else(|| parse_err(0, format!("missing matrix {name}")))?;
        if m.dim() != model.store.value(id).dim() {
            return Err(parse_err(
                0,
                format!(
                    "matrix {name} is {:?}, model expects {:?}",
                    m.dim(),
                    model.store.value(id).dim()
                ),
            ));
        }
        model.store.value_mut(id).assign(&m);
    }
    if let Some(extra) = matrices.keys().next() {
        return Err(parse_err(0, format!("unexpected matrix {extra}")));
    }
    model.target_mean = mean;
    model.target_std = std;
    Ok(())
}

pub fn load_checkpoint(model: &mut Model, path: impl AsRef<Path>) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    parse_checkpoint(model, &text)
}
