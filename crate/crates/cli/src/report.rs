use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Section {
    pub name: String,
    /// None for informational sections.
    pub pass: Option<bool>,
    pub summary: BTreeMap<String, Value>,
    pub table: Table,
}

impl Section {
    pub fn new(name: &str, table: Table) -> Self {
        Self { name: name.into(), pass: None, summary: BTreeMap::new(), table }
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn note(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.summary.insert(key.into(), value.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub metadata: BTreeMap<String, Value>,
    pub sections: Vec<Section>,
    pub pass: bool,
}

impl Report {
    pub fn finish(mut self) -> Self {
        self.pass = self.sections.iter().all(|s| s.pass != Some(false));
        self
    }

    pub fn failed_sections(&self) -> Vec<&str> {
        self.sections.iter().filter(|s| s.pass == Some(false)).map(|s| s.name.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite or null") + "\n"
    }

    /// Long format: section,row,column,value, with the section summaries as
    /// row "summary".
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,row,column,value\n");
        for s in &self.sections {
            if let Some(p) = s.pass {
                let _ = writeln!(out, "{},summary,pass,{p}", s.name);
            }
            for (k, v) in &s.summary {
                let _ = writeln!(out, "{},summary,{k},{}", s.name, csv_cell(v));
            }
            for (i, row) in s.table.rows.iter().enumerate() {
                for (c, v) in s.table.columns.iter().zip(row) {
                    let _ = writeln!(out, "{},{i},{c},{}", s.name, csv_cell(v));
                }
            }
        }
        out
    }

    pub fn write(&self, json: Option<&Path>, csv: Option<&Path>) -> Result<(), CliError> {
        let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
        match json {
            Some(p) => std::fs::write(p, self.to_json()).map_err(|e| io(p, e))?,
            None => print!("{}", self.to_json()),
        }
        if let Some(p) = csv {
            std::fs::write(p, self.to_csv()).map_err(|e| io(p, e))?;
        }
        Ok(())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON number, with non-finite values as null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}
