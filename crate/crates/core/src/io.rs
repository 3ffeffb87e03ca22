//! Text and binary matrix formats.
//!
//! CSV files are plain comma-separated numbers, one matrix row per line.
//! Raw files hold little-endian `f64` values in column-major order next to a
//! JSON sidecar `<file>.json` of the form `{"rows": p, "cols": n}`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KmdError, Result};

/// Format a float with 17 significant digits; `inf`, `-inf` and `nan` for
/// non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(token: &str, line: usize, field: usize) -> Result<f64> {
    let t = token.trim();
    match t.to_ascii_lowercase().as_str() {
        "nan" => return Ok(f64::NAN),
        "inf" | "+inf" | "infinity" => return Ok(f64::INFINITY),
        "-inf" | "-infinity" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    t.parse::<f64>().map_err(|_| KmdError::Parse {
        line,
        field,
        message: format!("not a number: {t:?}"),
    })
}

/// Read a rectangular numeric CSV into a matrix (rows as in the file).
pub fn read_csv(path: &Path, skip_header: bool) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path).map_err(|e| KmdError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| KmdError::io(path, e))?;
        if i == 0 && skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(j, tok)| parse_f64(tok, i + 1, j + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(KmdError::Dimension(format!(
                    "line {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(KmdError::Dimension(format!("{} holds no data", path.display())));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_csv<W: Write>(out: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KmdError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv(&mut out, m)
        .and_then(|_| out.flush())
        .map_err(|e| KmdError::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub rows: usize,
    pub cols: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_raw(path: &Path) -> Result<DMatrix<f64>> {
    let header_path = sidecar_path(path);
    let header_text = fs::read_to_string(&header_path).map_err(|e| KmdError::io(&header_path, e))?;
    let header: RawHeader =
        serde_json::from_str(&header_text).map_err(|e| KmdError::Header(format!("{}: {e}", header_path.display())))?;
    let bytes = fs::read(path).map_err(|e| KmdError::io(path, e))?;
    let expected = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| KmdError::Header("rows * cols overflows".into()))?;
    if bytes.len() != expected {
        return Err(KmdError::Dimension(format!(
            "header declares {}x{} ({} bytes) but payload has {} bytes",
            header.rows,
            header.cols,
            expected,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(DMatrix::from_vec(header.rows, header.cols, values))
}

pub fn write_raw(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * m.len());
    // nalgebra storage is column-major
    for v in m.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| KmdError::io(path, e))?;
    let header = RawHeader {
        rows: m.nrows(),
        cols: m.ncols(),
    };
    let header_path = sidecar_path(path);
    let text = serde_json::to_string(&header).expect("header serializes");
    fs::write(&header_path, text).map_err(|e| KmdError::io(&header_path, e))
}

/// Read a 0/1 mask file, flattened row-major.
pub fn read_mask(path: &Path) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path).map_err(|e| KmdError::io(path, e))?;
    let mut mask = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for (j, tok) in line.split(',').enumerate() {
            match tok.trim() {
                "" => continue,
                "0" => mask.push(false),
                "1" => mask.push(true),
                other => {
                    return Err(KmdError::Parse {
                        line: i + 1,
                        field: j + 1,
                        message: format!("mask values must be 0 or 1, got {other:?}"),
                    })
                }
            }
        }
    }
    Ok(mask)
}
