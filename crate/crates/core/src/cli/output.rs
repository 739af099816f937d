use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
pub struct Envelope<'a, P: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub params: &'a P,
    pub result: &'a R,
}

/// Flattens a JSON tree into `(dotted.path, scalar)` pairs in document order.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(v: &Value, path: &mut String, out: &mut Vec<(String, String)>) {
        let len = path.len();
        let child = |key: &str, v: &Value, path: &mut String, out: &mut Vec<_>| {
            if !path.is_empty() {
                path.push('.');
            }
            path.push_str(key);
            walk(v, path, out);
            path.truncate(len);
        };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, v)| child(k, v, path, out)),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .for_each(|(i, v)| child(&i.to_string(), v, path, out)),
            Value::Null => out.push((path.clone(), String::new())),
            Value::String(s) => out.push((path.clone(), s.clone())),
            other => out.push((path.clone(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk(value, &mut String::new(), &mut out);
    out
}

pub fn write_key_value_csv(value: &Value, out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "value"])?;
    for (k, v) in flatten(value) {
        w.write_record([k, v])?;
    }
    w.flush()
}

pub fn write_rows_csv(rows: &[Vec<String>], out: impl Write) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}
