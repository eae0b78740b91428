//! Table output: a one-line `#` header followed by CSV, written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The first line of every output table.
#[derive(Debug, Clone)]
pub struct RunHeader {
    command: &'static str,
    seed: u64,
    settings: Vec<(String, String)>,
}

impl RunHeader {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self { command, seed, settings: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.settings.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!("# genbayes {VERSION} command={} seed={}", self.command, self.seed);
        for (k, v) in &self.settings {
            let _ = write!(s, " {k}={v}");
        }
        s
    }
}

/// Shortest round-trip formatting, switching to exponent form for very
/// small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn nums(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

/// A CSV body under a run header.
#[derive(Debug)]
pub struct TableWriter {
    header: String,
    body: csv::Writer<Vec<u8>>,
    trailer: Vec<String>,
}

impl TableWriter {
    pub fn new(header: &RunHeader, columns: &[&str]) -> Self {
        let mut body = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        body.write_record(columns).expect("in-memory write");
        Self { header: header.line(), body, trailer: Vec::new() }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.body.write_record(cells).expect("in-memory write");
    }

    /// A `#` comment line after the rows.
    pub fn note(&mut self, text: impl Into<String>) {
        self.trailer.push(text.into());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        let mut out = self.header.into_bytes();
        out.push(b'\n');
        out.extend(self.body.into_inner().expect("in-memory write"));
        for line in self.trailer {
            out.extend(format!("# {line}\n").into_bytes());
        }
        out
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// `dir/name.csv` becomes `dir/name.<tag>.<ext>`.
pub fn sibling(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Indicator bits as a hex number with marker 0 in the lowest bit, padded to
/// one digit per four markers.
pub fn bitmask_hex(delta: &[bool]) -> String {
    let digits = delta.len().div_ceil(4).max(1);
    (0..digits)
        .rev()
        .map(|d| {
            let nibble = (0..4).filter(|b| delta.get(4 * d + b).copied().unwrap_or(false)).fold(0u32, |acc, b| acc | 1 << b);
            char::from_digit(nibble, 16).expect("nibble")
        })
        .collect()
}
