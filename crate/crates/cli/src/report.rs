//! JSON run reports.

use std::collections::BTreeMap;
use std::path::Path;

use beamnet::schwarz::CounterSnapshot;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Counters {
    pub factorizations: usize,
    pub local_solves: usize,
    pub coarse_solves: usize,
}

impl From<CounterSnapshot> for Counters {
    fn from(c: CounterSnapshot) -> Self {
        Self {
            factorizations: c.factorizations,
            local_solves: c.local_solves,
            coarse_solves: c.coarse_solves,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub config: Value,
    /// CSV and data files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
    pub counters: Option<Counters>,
    /// Headline numbers; each also appears in one of `outputs`.
    pub summary: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(experiment: &str, config: Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            config,
            outputs: Vec::new(),
            wall_seconds: 0.0,
            counters: None,
            summary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("report.json"), text + "\n")
    }
}
