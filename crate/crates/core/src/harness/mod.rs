//! Benchmark sweeps over a dataset, pass@k metrics and report rendering.

mod dataset;
mod metrics;
mod report;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::types::Approach;

pub use dataset::{load_dataset, parse_dataset, DatasetError};
pub use metrics::{
    avg_calls, avg_pass_at_1, coverage, pass_at_1, pass_at_5, Coverage, MetricPhase,
};
pub use report::{emit_report, render_report, summarize, ReportFormat, SummaryRow, REPORT_SCHEMA_VERSION};
pub use sweep::{mix_seed, run_trial, run_trials, SweepConfig, SweepError};

/// Outcome of one (instance, approach, trial) run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub instance_id: String,
    #[serde(default)]
    pub dataset: String,
    pub approach: Approach,
    pub trial: u32,
    /// Final candidate passed the base Frama-C check.
    pub fc_pass: bool,
    /// Final candidate passed WP, i.e. the run was solved.
    pub wp_pass: bool,
    pub llm_calls: u64,
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_code: Option<String>,
    pub seed: u64,
    /// Set when the run could not execute (verifier missing, I/O failure).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    fn key(&self) -> (Approach, &str, u32) {
        (self.approach, self.instance_id.as_str(), self.trial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResultMatrix {
    pub records: Vec<TrialRecord>,
    pub n_trials: u32,
    /// Instance ids in dataset order.
    pub instances: Vec<String>,
}

impl ResultMatrix {
    pub fn new(instances: Vec<String>, n_trials: u32) -> Self {
        Self {
            records: Vec::new(),
            n_trials,
            instances,
        }
    }

    /// Adds records, keeping one record per (approach, instance, trial); a
    /// later record replaces an earlier one. Records stay sorted by approach,
    /// instance order and trial.
    pub fn insert(&mut self, records: impl IntoIterator<Item = TrialRecord>) {
        for r in records {
            if let Some(existing) = self.records.iter_mut().find(|e| e.key() == r.key()) {
                *existing = r;
            } else {
                if !self.instances.contains(&r.instance_id) {
                    self.instances.push(r.instance_id.clone());
                }
                self.records.push(r);
            }
        }
        self.sort();
    }

    pub fn merge(&mut self, other: ResultMatrix) {
        self.n_trials = self.n_trials.max(other.n_trials);
        for id in other.instances {
            if !self.instances.contains(&id) {
                self.instances.push(id);
            }
        }
        self.insert(other.records);
    }

    fn sort(&mut self) {
        let order = |id: &str| self.instances.iter().position(|i| i == id).unwrap_or(usize::MAX);
        let mut keyed: Vec<_> = std::mem::take(&mut self.records)
            .into_iter()
            .map(|r| ((r.approach, order(&r.instance_id), r.trial), r))
            .collect();
        keyed.sort_by_key(|k| k.0);
        self.records = keyed.into_iter().map(|(_, r)| r).collect();
    }

    pub fn approaches(&self) -> Vec<Approach> {
        let mut out: Vec<Approach> = self.records.iter().map(|r| r.approach).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = self.records.iter().map(|r| r.dataset.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Records of one dataset, with the instance list narrowed to match.
    pub fn subset(&self, dataset: &str) -> ResultMatrix {
        let records: Vec<TrialRecord> = self
            .records
            .iter()
            .filter(|r| r.dataset == dataset)
            .cloned()
            .collect();
        let instances = self
            .instances
            .iter()
            .filter(|id| records.iter().any(|r| &r.instance_id == *id))
            .cloned()
            .collect();
        ResultMatrix {
            records,
            n_trials: self.n_trials,
            instances,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a matrix from a record log. `n_trials` is the largest trial
    /// index seen plus one unless given.
    pub fn from_jsonl(text: &str, n_trials: Option<u32>) -> Result<Self, DatasetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: TrialRecord = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(r);
        }
        let n = n_trials.unwrap_or_else(|| records.iter().map(|r| r.trial + 1).max().unwrap_or(0));
        let mut m = ResultMatrix::new(Vec::new(), n);
        m.insert(records);
        Ok(m)
    }
}
