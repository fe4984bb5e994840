//! Run manifests: the resolved configuration plus results, as TOML.
//!
//! Manifests hold no timings or host details, so identical inputs give
//! byte-identical manifests.

use toml::{Table, Value};

use crate::config::ProblemConfig;

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    table: Table,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", "name", command);
        m
    }

    /// Copies every resolved configuration section.
    pub fn with_config(mut self, config: &ProblemConfig) -> Self {
        let resolved = Table::try_from(config).expect("configuration serializes");
        for (section, body) in resolved {
            self.table.insert(section, body);
        }
        self
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<Value>) {
        let entry = self
            .table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(t) = entry {
            t.insert(key.to_string(), value.into());
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.table.get(section)?.get(key)
    }

    pub fn render(&self) -> String {
        toml::to_string(&self.table).expect("manifest serializes")
    }
}

/// `[(k, diff), ...]` as an array of two-element arrays.
pub fn pairs(items: &[(u32, f64)]) -> Value {
    Value::Array(
        items
            .iter()
            .map(|&(k, d)| Value::Array(vec![Value::Integer(k as i64), Value::Float(d)]))
            .collect(),
    )
}

pub fn floats(items: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(items.into_iter().map(Value::Float).collect())
}
