//! Deterministic CSV emission. Files open with `#`-prefixed comment
//! lines carrying the config fingerprint and modeling notes, then a
//! header row, then data rows. Nothing time- or path-dependent is ever
//! written, so identical config and seed produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Fixed-notation float field: full precision, locale-free, stable.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

/// CSV file under construction.
pub struct CsvFile {
    out: BufWriter<File>,
}

impl CsvFile {
    /// Creates the file and writes comment lines plus the header row.
    /// Comments must not contain newlines.
    pub fn create(path: &Path, comments: &[String], header: &str) -> Result<Self, String> {
        let f = File::create(path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        let mut out = BufWriter::new(f);
        for c in comments {
            debug_assert!(!c.contains('\n'));
            writeln!(out, "# {c}").map_err(|e| format!("write {}: {e}", path.display()))?;
        }
        writeln!(out, "{header}").map_err(|e| format!("write {}: {e}", path.display()))?;
        Ok(CsvFile { out })
    }

    /// Writes one data row, already comma-joined by the caller.
    pub fn row(&mut self, line: &str) -> Result<(), String> {
        writeln!(self.out, "{line}").map_err(|e| format!("csv write: {e}"))
    }

    /// Flushes and closes the file.
    pub fn finish(mut self) -> Result<(), String> {
        self.out.flush().map_err(|e| format!("csv flush: {e}"))
    }
}
