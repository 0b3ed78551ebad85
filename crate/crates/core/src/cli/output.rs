use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::OutputFormat;
use super::CliError;

/// Rendered outputs of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    /// Complete report, written in JSON mode.
    pub report: String,
    /// Tabular view, written in CSV mode.
    pub table: String,
    /// Report without the table rows, shown next to the CSV.
    pub summary: String,
    /// Reason the command's cross-check failed, if it did.
    pub failure: Option<String>,
}

impl Outcome {
    /// JSON mode writes `report` to the output (stdout by default). CSV mode
    /// writes `table` there and `summary` to stdout, or to stderr when the
    /// table itself goes to stdout.
    pub fn write(&self) -> Result<(), CliError> {
        match (self.format, &self.output) {
            (OutputFormat::Json, Some(path)) => write_file(path, &self.report),
            (OutputFormat::Json, None) => write_stdout(&self.report),
            (OutputFormat::Csv, Some(path)) => {
                write_file(path, &self.table)?;
                write_stdout(&self.summary)
            }
            (OutputFormat::Csv, None) => {
                write_stdout(&self.table)?;
                eprint!("{}", self.summary);
                Ok(())
            }
        }
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_stdout(text: &str) -> Result<(), CliError> {
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        })
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub(crate) fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io {
            path: "<csv>".into(),
            source: e.into(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io {
        path: "<csv>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// JSON Lines: one compact object per line.
pub(crate) fn to_json_lines<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}
