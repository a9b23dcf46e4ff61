//! Run records: resolved config, outputs, metrics and pass/fail checks.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub kind: String,
    pub seed: u64,
    pub config_toml: String,
    pub outputs: Vec<PathBuf>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub wall_ms: u128,
}

impl RunRecord {
    pub fn new(kind: &str, seed: u64, config_toml: String) -> Self {
        Self {
            kind: kind.to_string(),
            seed,
            config_toml,
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
            checks: BTreeMap::new(),
            wall_ms: 0,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn check(&mut self, name: &str, ok: bool) {
        self.checks.insert(name.to_string(), ok);
    }

    pub fn passed(&self) -> bool {
        self.checks.values().all(|&v| v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}
