use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Outcome of one experiment. `pass` is decided from `statistics` against the
/// constants in [`crate::thresholds`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub params: BTreeMap<String, Value>,
    pub statistics: BTreeMap<String, f64>,
    pub pass: bool,
    pub seed: u64,
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            statistics: BTreeMap::new(),
            pass: false,
            seed,
            runtime_seconds: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn stat(&mut self, key: &str, value: f64) -> &mut Self {
        self.statistics.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.statistics.get(key).copied()
    }

    /// Folds another report's statistics in under `prefix.` and ANDs `pass`.
    pub fn absorb(&mut self, prefix: &str, other: &ExperimentReport) {
        for (k, v) in &other.statistics {
            self.statistics.insert(format!("{prefix}.{k}"), *v);
        }
        self.pass &= other.pass;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Only the deterministic part: everything except `runtime_seconds`.
    pub fn statistics_json(&self) -> String {
        serde_json::to_string(&self.statistics).expect("statistics serialize")
    }
}
