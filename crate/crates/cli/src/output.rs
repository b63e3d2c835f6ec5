//! CSV and JSON emission with a metadata block.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thermorev::numfmt::{format_f64, to_json_pretty};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Flat result table, one CSV row per entry.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        let err = |e: csv::Error| CliError::io(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(e.to_string()))
    }
}

pub fn num(v: f64) -> String {
    format_f64(v)
}

/// Result of one command: a table for CSV, a structured value for JSON and
/// a summary added to the metadata block.
pub struct Report {
    pub table: Table,
    pub json: Value,
    pub summary: Option<Value>,
}

impl Report {
    pub fn new(table: Table, json: &impl Serialize) -> Self {
        Report { table, json: serde_json::to_value(json).expect("results serialize to JSON"), summary: None }
    }

    pub fn with_summary(mut self, summary: &impl Serialize) -> Self {
        self.summary = Some(serde_json::to_value(summary).expect("results serialize to JSON"));
        self
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a Value>,
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = to_json_pretty(v).expect("results serialize to JSON");
    s.push('\n');
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// CSV goes to the output path with a `.meta.json` sidecar (no sidecar on
/// stdout); JSON nests the result under `result` next to `meta`.
pub fn emit(report: &Report, config: &RunConfig) -> Result<(), CliError> {
    let meta = Meta {
        tool: "thermorev",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command.expect("validated config").name(),
        config,
        summary: report.summary.as_ref(),
    };
    match config.format.unwrap_or_default() {
        Format::Csv => {
            let mut buf = Vec::new();
            report.table.write_csv(&mut buf)?;
            match &config.output {
                Some(p) => {
                    write_file(p, &buf)?;
                    write_file(&sidecar_path(p), pretty(&meta).as_bytes())
                }
                None => io::stdout().write_all(&buf).map_err(|e| CliError::io(e.to_string())),
            }
        }
        Format::Json => {
            let doc = serde_json::json!({ "meta": serde_json::to_value(&meta).expect("metadata serializes"), "result": report.json });
            let text = pretty(&doc);
            match &config.output {
                Some(p) => write_file(p, text.as_bytes()),
                None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io(e.to_string())),
            }
        }
    }
}
