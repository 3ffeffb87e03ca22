//! Fail-atomic artifact directories and table writers.
//!
//! Files are written into a hidden staging directory next to the target and
//! moved into place only after every artifact has been produced.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kmd_core::io::fmt_f64;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub struct Staging {
    dir: tempfile::TempDir,
    target: PathBuf,
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

impl Staging {
    pub fn new(target: &Path) -> CliResult<Self> {
        if target.exists() && !target.is_dir() {
            return Err(CliError::Usage(format!("{} exists and is not a directory", target.display())));
        }
        let parent = parent_of(target);
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let dir = tempfile::Builder::new()
            .prefix(".kmd-staging-")
            .tempdir_in(&parent)
            .map_err(|e| CliError::io(&parent, e))?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
        })
    }

    /// Path inside the staging area; parent directories are created.
    pub fn path(&self, relative: &str) -> CliResult<PathBuf> {
        let p = self.dir.path().join(relative);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(p)
    }

    pub fn dir(&self, relative: &str) -> CliResult<PathBuf> {
        let p = self.dir.path().join(relative);
        fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    /// Move every staged entry into the target directory, replacing
    /// same-named entries.
    pub fn commit(self) -> CliResult<()> {
        fs::create_dir_all(&self.target).map_err(|e| CliError::io(&self.target, e))?;
        let mut entries: Vec<PathBuf> = fs::read_dir(self.dir.path())
            .map_err(|e| CliError::io(self.dir.path(), e))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(self.dir.path(), e))?;
        entries.sort();
        for src in entries {
            let dest = self.target.join(src.file_name().expect("staged entries have names"));
            if dest.is_dir() {
                fs::remove_dir_all(&dest).map_err(|e| CliError::io(&dest, e))?;
            } else if dest.exists() {
                fs::remove_file(&dest).map_err(|e| CliError::io(&dest, e))?;
            }
            fs::rename(&src, &dest).map_err(|e| CliError::io(&dest, e))?;
        }
        Ok(())
    }
}

/// Write a single file atomically via a temporary sibling.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let parent = parent_of(path);
    let mut tmp = tempfile::Builder::new()
        .prefix(".kmd-")
        .tempfile_in(&parent)
        .map_err(|e| CliError::io(&parent, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    };
    write().map_err(|e| CliError::io(path, e))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> CliResult<()> {
    kmd_core::io::write_csv_file(path, m).map_err(CliError::from)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact structs serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn num(v: f64) -> String {
    fmt_f64(v)
}

/// JSON has no infinities; non-finite values become `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
