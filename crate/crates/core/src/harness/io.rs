//! Output directory writer: raw dumps, PGM renders, CSV series, checksums.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::grid::{Grid2D, RealField2D};

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn read_raw_file(path: &Path, grid: Grid2D) -> Result<RealField2D> {
    RealField2D::read_raw(&mut BufReader::new(File::open(path)?), grid)
}

/// Binary 8-bit PGM with linear min-max scaling; `y` grows upwards.
pub fn render_pgm(field: &RealField2D) -> (Vec<u8>, f64, f64) {
    let g = field.grid;
    let lo = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", g.n_x, g.n_y).into_bytes();
    for q in (0..g.n_y).rev() {
        for p in 0..g.n_x {
            let v = if span > 0.0 { (field.at(p, q) - lo) / span } else { 0.0 };
            out.push((v * 255.0).round() as u8);
        }
    }
    (out, lo, hi)
}

/// `snap_<clock>_<time>_<field>`.
pub fn snapshot_stem(clock: &str, time: f64, field: &str) -> String {
    format!("snap_{clock}_{time}_{field}")
}

/// Writes files into one directory and remembers their checksums.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `(file name, sha256)` in write order.
    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.files.push((name.to_string(), sha256_file(&path)?));
        Ok(())
    }

    pub fn write_raw(&mut self, name: &str, field: &RealField2D) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + 8 * field.values.len());
        field.write_raw(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    /// Raw dump, PGM render and the render's scale sidecar.
    pub fn write_snapshot(&mut self, stem: &str, field: &RealField2D) -> Result<()> {
        self.write_raw(&format!("{stem}.raw"), field)?;
        let (pgm, lo, hi) = render_pgm(field);
        self.write_bytes(&format!("{stem}.pgm"), &pgm)?;
        self.write_bytes(&format!("{stem}.pgm.scale"), format!("min = {lo}\nmax = {hi}\n").as_bytes())
    }
}

/// Accumulates CSV rows in memory; numbers use round-trip formatting.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn save(&self, out: &mut OutputDir, name: &str) -> Result<()> {
        out.write_bytes(name, self.text.as_bytes())
    }
}

/// Writes `text` to `path` through a buffered file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}
