use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::Format;

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)` so no value needs more than 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A CSV table held in memory until the run succeeds.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub enum Cell<'a> {
    Num(f64),
    Text(&'a str),
    Int(usize),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: &[Cell<'_>]) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(
            cells
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_num(*v),
                    Cell::Text(s) => s.to_string(),
                    Cell::Int(i) => i.to_string(),
                })
                .collect(),
        );
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().context("flushing CSV buffer")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub format: Format,
    pub bytes: usize,
}

/// Files produced by a run, written together once every task succeeded.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Format, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: String, format: Format, bytes: Vec<u8>) {
        self.files.push((name, format, bytes));
    }

    pub fn csv(&mut self, name: String, table: &Table) -> Result<()> {
        self.add(name, Format::Csv, table.to_bytes()?);
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: String, value: &S) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, Format::Json, bytes);
        Ok(())
    }

    pub fn svg(&mut self, name: String, doc: String) {
        self.add(name, Format::Svg, doc.into_bytes());
    }

    /// Writes every file whose format was requested and returns the manifest.
    pub fn write(self, dir: &Path, formats: &[Format]) -> Result<Vec<FileEntry>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut manifest = Vec::new();
        for (name, format, bytes) in self.files {
            if !formats.contains(&format) {
                continue;
            }
            let path = dir.join(&name);
            fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            manifest.push(FileEntry {
                path: path.display().to_string(),
                format,
                bytes: bytes.len(),
            });
        }
        Ok(manifest)
    }
}
