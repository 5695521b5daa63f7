//! Result tables, CSV and JSON writers.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("kzwork ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: &'static str,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: &'static str) -> Self {
        Column { name: name.into(), unit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

/// 17 significant digits, locale independent.
pub fn format_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        ResultTable { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn check(&self) -> Result<(), CliError> {
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if matches!(cell, Cell::Num(x) if x.is_nan()) {
                    return Err(CliError::Numerical(format!(
                        "output: NaN in row {r}, column {}",
                        self.columns[c].name
                    )));
                }
            }
        }
        Ok(())
    }

    /// `#` metadata lines, then an RFC 4180 body with `name(unit)` headers.
    pub fn write_csv<W: Write>(&self, meta: &Metadata, w: W) -> Result<(), CliError> {
        self.check()?;
        let mut w = w;
        for line in meta.comment_lines() {
            writeln!(w, "# {line}").map_err(CliError::io)?;
        }
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        csv.write_record(self.columns.iter().map(|c| format!("{}({})", c.name, c.unit)))
            .map_err(CliError::io)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|cell| match cell {
                Cell::Num(x) => format_num(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(CliError::io)?;
        }
        csv.flush().map_err(CliError::io)
    }
}

/// Provenance stamped on every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub config_sha256: String,
    pub config: RunConfig,
}

impl Metadata {
    pub fn new(config: &RunConfig) -> Result<Self, CliError> {
        let canonical = serde_json::to_string(config).map_err(CliError::io)?;
        let hash = Sha256::digest(canonical.as_bytes());
        Ok(Metadata {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            config_sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
            config: config.clone(),
        })
    }

    fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("schema_version: {}", self.schema_version),
            format!("tool_version: {}", self.tool_version),
            format!("config_sha256: {}", self.config_sha256),
            format!(
                "config: {}",
                serde_json::to_string(&self.config).expect("config serialises")
            ),
        ]
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    meta: &'a Metadata,
    result: &'a T,
}

/// Pretty JSON document with the metadata alongside `result`.
pub fn to_json<T: Serialize>(meta: &Metadata, result: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope { meta, result }).map_err(CliError::io)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_num(0.0), "0.0000000000000000e0");
        assert_eq!(format_num(-1.5e-3), "-1.5000000000000000e-3");
        assert_eq!(format_num(f64::INFINITY), "inf");
        let x = 0.1f64 + 0.2;
        assert_eq!(format_num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn nan_cells_are_rejected() {
        let mut t = ResultTable::new(vec![Column::new("x", "1")]);
        t.push(vec![Cell::Num(f64::NAN)]);
        let cfg = crate::config::RunConfig::resolve("cfw", Default::default(), &Default::default()).unwrap();
        let meta = Metadata::new(&cfg).unwrap();
        assert!(t.write_csv(&meta, Vec::new()).is_err());
    }
}
