#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kmd_core::io::write_csv_file;
use kmd_core::synthetic::{Oscillator, PlantedSystem};
use kmd_core::C64;
use nalgebra::DMatrix;

pub fn kmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmd"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn ok(args: &[&str]) -> Output {
    let out = kmd(args);
    assert_eq!(
        code(&out),
        0,
        "kmd {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_data(dir: &Path, name: &str, m: &DMatrix<f64>) -> PathBuf {
    let path = dir.join(name);
    write_csv_file(&path, m).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parsed CSV with a header line.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Table {
        let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Table { header, rows }
    }

    pub fn col(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| kmd_core::io::parse_f64(&r[i], 0, 0).unwrap()).collect()
    }
}

/// Ten orthogonal modes (two real, four pairs) with `|λ| ∈ [0.85, 1]`.
pub fn ten_mode_system(amplitudes: [f64; 6]) -> PlantedSystem {
    let spec = [(1.0, 0.0), (0.9, 0.0), (0.98, 0.3), (0.95, 0.7), (0.9, 1.2), (0.85, 2.0)];
    let osc: Vec<Oscillator> = spec
        .iter()
        .zip(amplitudes)
        .enumerate()
        .map(|(i, (&(m, a), amp))| Oscillator::new(m, a, C64::from_polar(amp, 0.4 * i as f64)))
        .collect();
    PlantedSystem::new(40, &osc).unwrap()
}

pub fn nearest(estimates: &[C64], target: C64) -> f64 {
    estimates.iter().map(|e| (e - target).norm()).fold(f64::INFINITY, f64::min)
}

/// Every file under `dir`, relative path and bytes, sorted by path.
pub fn snapshot_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
