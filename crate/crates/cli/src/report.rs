//! Report assembly: ordered sections of key/value entries, rendered as
//! structured text and as JSON. Non-finite numbers serialise as strings
//! so the JSON stays valid.

use serde_json::{json, Map, Value};

pub struct Section {
    pub title: String,
    entries: Vec<(String, Value)>,
}

impl Section {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: Value) {
        self.entries.push((key.into(), value));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, number(value));
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.push(key, Value::String(value.into()));
    }

    pub fn flag(&mut self, key: impl Into<String>, value: bool) {
        self.push(key, Value::Bool(value));
    }

    pub fn optional_num(&mut self, key: impl Into<String>, value: Option<f64>) {
        match value {
            Some(v) => self.num(key, v),
            None => self.text(key, "absent"),
        }
    }
}

/// A finite number, or its string spelling for infinities and NaN.
pub fn number(value: f64) -> Value {
    if value.is_finite() {
        json!(value)
    } else if value.is_nan() {
        Value::String("nan".to_string())
    } else if value > 0.0 {
        Value::String("inf".to_string())
    } else {
        Value::String("-inf".to_string())
    }
}

#[derive(Default)]
pub struct Report {
    sections: Vec<Section>,
    failures: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.failures.push(message.into());
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for section in &self.sections {
            out.push_str(&format!("[{}]\n", section.title));
            for (key, value) in &section.entries {
                let rendered = match value {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                out.push_str(&format!("{key}: {rendered}\n"));
            }
            out.push('\n');
        }
        if !self.failures.is_empty() {
            out.push_str("[failures]\n");
            for failure in &self.failures {
                out.push_str(&format!("- {failure}\n"));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let sections: Vec<Value> = self
            .sections
            .iter()
            .map(|s| {
                let mut entries = Map::new();
                for (key, value) in &s.entries {
                    entries.insert(key.clone(), value.clone());
                }
                json!({"title": s.title, "entries": Value::Object(entries)})
            })
            .collect();
        json!({
            "sections": sections,
            "failures": self.failures,
        })
    }
}
