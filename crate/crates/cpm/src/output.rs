//! Table output in CSV or JSON.
//!
//! Both formats carry the same content: the resolved configuration, the label
//! columns identifying each series (model, state, ...) and the numeric
//! columns. Floats use Rust's shortest round-trip formatting, so identical
//! inputs give identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, Result};

/// One curve: its label values and one row per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub labels: Vec<Value>,
    pub rows: Vec<Vec<f64>>,
}

/// Several series sharing label and value column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub command: String,
    pub label_names: Vec<&'static str>,
    pub columns: Vec<&'static str>,
    pub series: Vec<Series>,
}

impl Dataset {
    pub fn new(command: &str, label_names: &[&'static str], columns: &[&'static str]) -> Self {
        Self {
            command: command.to_string(),
            label_names: label_names.to_vec(),
            columns: columns.to_vec(),
            series: Vec::new(),
        }
    }

    pub fn push(&mut self, labels: Vec<Value>, rows: Vec<Vec<f64>>) {
        debug_assert_eq!(labels.len(), self.label_names.len());
        debug_assert!(rows.iter().all(|r| r.len() == self.columns.len()));
        self.series.push(Series { labels, rows });
    }

    pub fn render(&self, config: &ExperimentConfig) -> Result<String> {
        match config.format {
            Format::Csv => Ok(self.to_csv(config)),
            Format::Json => self.to_json(config),
        }
    }

    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = config.comment_line(&self.command);
        out.push('\n');
        let header: Vec<&str> = self.label_names.iter().chain(&self.columns).copied().collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for series in &self.series {
            let labels: Vec<String> = series.labels.iter().map(label_text).collect();
            for row in &series.rows {
                let mut line = labels.join(",");
                for &v in row {
                    if !line.is_empty() {
                        line.push(',');
                    }
                    write!(line, "{}", csv_float(v)).expect("writing to a String");
                }
                out.push_str(&line);
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self, config: &ExperimentConfig) -> Result<String> {
        let series: Vec<Value> = self
            .series
            .iter()
            .map(|s| {
                let mut obj = Map::new();
                for (name, value) in self.label_names.iter().zip(&s.labels) {
                    obj.insert((*name).to_string(), value.clone());
                }
                let mut data = Map::new();
                for (j, name) in self.columns.iter().enumerate() {
                    let column: Vec<Value> = s.rows.iter().map(|r| json_float(r[j])).collect();
                    data.insert((*name).to_string(), Value::Array(column));
                }
                obj.insert("data".into(), Value::Object(data));
                Value::Object(obj)
            })
            .collect();
        let doc = json!({
            "command": self.command,
            "config": serde_json::to_value(config)?,
            "columns": self.columns,
            "series": series,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }
}

fn label_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn json_float(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
