//! Deterministic run reports.
//!
//! A report is an ordered list of sections, each an ordered list of
//! key-value entries. The same tree renders to a line-oriented text body
//! and to a JSON sidecar, so the two files always carry identical content.
//! Floats print through `Display`, the shortest round-trip form, which is a
//! pure function of the bits; nothing in a body depends on the clock.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Text(String),
    Int(i64),
    UInt(u64),
    Float(f64),
    Bool(bool),
    Floats(Vec<f64>),
    Ints(Vec<i64>),
    Texts(Vec<String>),
}

#[derive(Debug, Clone, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, Entry)>,
}

impl Section {
    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Section {
        self.entries.push((key.into(), Entry::Text(value.into())));
        self
    }

    pub fn int(&mut self, key: &str, value: i64) -> &mut Section {
        self.entries.push((key.into(), Entry::Int(value)));
        self
    }

    pub fn uint(&mut self, key: &str, value: u64) -> &mut Section {
        self.entries.push((key.into(), Entry::UInt(value)));
        self
    }

    pub fn float(&mut self, key: &str, value: f64) -> &mut Section {
        self.entries.push((key.into(), Entry::Float(value)));
        self
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Section {
        self.entries.push((key.into(), Entry::Bool(value)));
        self
    }

    pub fn floats(&mut self, key: &str, values: Vec<f64>) -> &mut Section {
        self.entries.push((key.into(), Entry::Floats(values)));
        self
    }

    pub fn ints(&mut self, key: &str, values: Vec<i64>) -> &mut Section {
        self.entries.push((key.into(), Entry::Ints(values)));
        self
    }

    pub fn texts(&mut self, key: &str, values: Vec<String>) -> &mut Section {
        self.entries.push((key.into(), Entry::Texts(values)));
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn section(&mut self, name: &str) -> &mut Section {
        self.sections.push(Section { name: name.into(), entries: Vec::new() });
        self.sections.last_mut().expect("just pushed")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for section in &self.sections {
            out.push('[');
            out.push_str(&section.name);
            out.push_str("]\n");
            for (key, entry) in &section.entries {
                out.push_str(key);
                out.push_str(" = ");
                render_entry_text(entry, &mut out);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    pub fn render_json(&self) -> String {
        let sections: Vec<Value> = self
            .sections
            .iter()
            .map(|section| {
                let entries: Vec<Value> = section
                    .entries
                    .iter()
                    .map(|(key, entry)| json!([key, entry_json(entry)]))
                    .collect();
                json!({ "name": section.name, "entries": entries })
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&json!({ "sections": sections }))
            .expect("report values are always serializable");
        text.push('\n');
        text
    }
}

fn render_entry_text(entry: &Entry, out: &mut String) {
    match entry {
        Entry::Text(v) => out.push_str(v),
        Entry::Int(v) => out.push_str(&v.to_string()),
        Entry::UInt(v) => out.push_str(&v.to_string()),
        Entry::Float(v) => out.push_str(&float_text(*v)),
        Entry::Bool(v) => out.push_str(if *v { "true" } else { "false" }),
        Entry::Floats(vs) => {
            let parts: Vec<String> = vs.iter().map(|v| float_text(*v)).collect();
            out.push('[');
            out.push_str(&parts.join(", "));
            out.push(']');
        }
        Entry::Ints(vs) => {
            let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            out.push('[');
            out.push_str(&parts.join(", "));
            out.push(']');
        }
        Entry::Texts(vs) => {
            out.push('[');
            out.push_str(&vs.join(", "));
            out.push(']');
        }
    }
}

fn float_text(v: f64) -> String {
    format!("{v}")
}

fn entry_json(entry: &Entry) -> Value {
    match entry {
        Entry::Text(v) => json!(v),
        Entry::Int(v) => json!(v),
        Entry::UInt(v) => json!(v),
        Entry::Float(v) => float_json(*v),
        Entry::Bool(v) => json!(v),
        Entry::Floats(vs) => Value::Array(vs.iter().map(|v| float_json(*v)).collect()),
        Entry::Ints(vs) => json!(vs),
        Entry::Texts(vs) => json!(vs),
    }
}

fn float_json(v: f64) -> Value {
    // JSON has no NaN or infinities; fall back to the text form, which is
    // what the text body shows anyway.
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| json!(float_text(v)))
}

/// Writes `<command>.report.txt`, `<command>.report.json`, and
/// `<command>.timing.txt`. Only the timing file depends on the clock.
pub fn write(
    out_dir: &Path,
    command: &str,
    report: &Report,
    wall_ms: u128,
) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let text_path = out_dir.join(format!("{command}.report.txt"));
    std::fs::write(&text_path, report.render_text()).map_err(|e| CliError::io(&text_path, e))?;
    let json_path = out_dir.join(format!("{command}.report.json"));
    std::fs::write(&json_path, report.render_json()).map_err(|e| CliError::io(&json_path, e))?;
    let timing_path = out_dir.join(format!("{command}.timing.txt"));
    std::fs::write(&timing_path, format!("wall_ms = {wall_ms}\n"))
        .map_err(|e| CliError::io(&timing_path, e))?;
    Ok((text_path, json_path))
}
