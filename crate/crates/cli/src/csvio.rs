//! CSV writing with round-trip-safe float formatting.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

/// 17 significant digits: exact round trip for f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    buf: Vec<u8>,
}

impl CsvWriter {
    pub fn new(header: &str) -> Self {
        let mut buf = Vec::new();
        writeln!(buf, "{header}").unwrap();
        Self { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        writeln!(self.buf, "{}", fields.join(",")).unwrap();
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(path, &self.buf).with_context(|| format!("writing {}", path.display()))
    }
}

/// Parse a CSV produced by this crate back into header + float-or-string
/// cells (used by `--verify`-style tooling and tests).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.0 / 3.0,
            6.02e23,
            1e-300,
            std::f64::consts::PI,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{s} did not round trip");
        }
    }
}
