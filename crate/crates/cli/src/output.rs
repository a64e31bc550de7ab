//! Deterministic file emission. All CSV numbers use fixed notation with
//! 12 significant digits, `.` as decimal separator and `\n` line endings,
//! independent of locale, so repeated runs compare byte for byte.

use crate::CliError;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Fixed-notation formatting with 12 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).clamp(0, 32) as usize;
    format!("{x:.decimals$}")
}

pub struct CsvWriter {
    writer: BufWriter<File>,
    path: String,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self, CliError> {
        let display = path.display().to_string();
        let file = File::create(path).map_err(CliError::io(display.clone()))?;
        let mut writer = BufWriter::new(file);
        writer
            .write_all(header.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(CliError::io(display.clone()))?;
        Ok(CsvWriter {
            writer,
            path: display,
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        let line = fields.join(",");
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(CliError::io(self.path.clone()))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(CliError::io(self.path.clone()))
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let display = path.display().to_string();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(display))
}
