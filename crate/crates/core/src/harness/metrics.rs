//! Pass@1, average Pass@1, Pass@5 and average call count.
//!
//! All rates are percentages over the records that are present. Missing
//! records shrink the denominator and log a coverage warning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ResultMatrix, TrialRecord};
use crate::types::Approach;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricPhase {
    Fc,
    Wp,
}

impl MetricPhase {
    fn passed(self, r: &TrialRecord) -> bool {
        match self {
            Self::Fc => r.fc_pass,
            Self::Wp => r.wp_pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub present: usize,
    pub expected: usize,
}

impl Coverage {
    pub fn is_complete(&self) -> bool {
        self.present >= self.expected
    }
}

/// Records present for `approach` versus instances × trials.
pub fn coverage(m: &ResultMatrix, approach: Approach) -> Coverage {
    Coverage {
        present: m.records.iter().filter(|r| r.approach == approach).count(),
        expected: m.instances.len() * m.n_trials as usize,
    }
}

fn percent(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 * 100.0 / total as f64
    }
}

fn warn_if_partial(m: &ResultMatrix, approach: Approach, present: usize, what: &str) {
    if present < m.instances.len() {
        log::warn!(
            "{approach} {what}: {present} of {} instances have records",
            m.instances.len()
        );
    }
}

/// Share of instances whose record at `trial` passed `phase`.
pub fn pass_at_1(m: &ResultMatrix, approach: Approach, trial: u32, phase: MetricPhase) -> f64 {
    let records: Vec<&TrialRecord> = m
        .records
        .iter()
        .filter(|r| r.approach == approach && r.trial == trial)
        .collect();
    warn_if_partial(m, approach, records.len(), &format!("trial {trial}"));
    percent(records.iter().filter(|r| phase.passed(r)).count(), records.len())
}

/// Mean of [`pass_at_1`] over the trials that have at least one record.
pub fn avg_pass_at_1(m: &ResultMatrix, approach: Approach, phase: MetricPhase) -> f64 {
    let values: Vec<f64> = (0..m.n_trials)
        .filter(|&t| m.records.iter().any(|r| r.approach == approach && r.trial == t))
        .map(|t| pass_at_1(m, approach, t, phase))
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Share of instances with at least one passing trial.
pub fn pass_at_5(m: &ResultMatrix, approach: Approach, phase: MetricPhase) -> f64 {
    let mut any: BTreeMap<&str, bool> = BTreeMap::new();
    for r in m.records.iter().filter(|r| r.approach == approach && r.trial < m.n_trials) {
        *any.entry(r.instance_id.as_str()).or_default() |= phase.passed(r);
    }
    warn_if_partial(m, approach, any.len(), "pass@k");
    percent(any.values().filter(|&&p| p).count(), any.len())
}

/// Mean LLM calls per record.
pub fn avg_calls(m: &ResultMatrix, approach: Approach) -> f64 {
    let calls: Vec<u64> = m
        .records
        .iter()
        .filter(|r| r.approach == approach)
        .map(|r| r.llm_calls)
        .collect();
    if calls.is_empty() {
        return 0.0;
    }
    calls.iter().sum::<u64>() as f64 / calls.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, trial: u32, wp: bool, calls: u64) -> TrialRecord {
        TrialRecord {
            instance_id: id.into(),
            dataset: "d".into(),
            approach: Approach::Autoice,
            trial,
            fc_pass: true,
            wp_pass: wp,
            llm_calls: calls,
            wall_time_ms: 0,
            final_code: None,
            seed: 0,
            error: None,
        }
    }

    #[test]
    fn examples() {
        let ids: Vec<String> = (0..12).map(|i| format!("i{i}")).collect();
        let mut m = ResultMatrix::new(ids.clone(), 1);
        m.insert(ids.iter().enumerate().map(|(i, id)| rec(id, 0, i < 10, 10)));
        let p = pass_at_1(&m, Approach::Autoice, 0, MetricPhase::Wp);
        assert!((p - 83.333_333).abs() < 1e-4);
        assert_eq!(pass_at_1(&m, Approach::Autoice, 0, MetricPhase::Fc), 100.0);
        assert_eq!(pass_at_1(&m, Approach::ZeroShot, 0, MetricPhase::Fc), 0.0);

        let mut m = ResultMatrix::new(vec!["a".into()], 5);
        m.insert([0, 0, 1, 0, 0].iter().enumerate().map(|(t, &w)| rec("a", t as u32, w == 1, 10 + 40 * (t as u64 % 2))));
        assert_eq!(pass_at_5(&m, Approach::Autoice, MetricPhase::Wp), 100.0);
        assert_eq!(avg_pass_at_1(&m, Approach::Autoice, MetricPhase::Wp), 20.0);
        assert_eq!(avg_calls(&m, Approach::Autoice), 26.0);
    }

    #[test]
    fn avg_of_per_trial_values() {
        // per-trial wp rates 100, 80, 80, 60, 80 over five instances
        let passes = [[1, 1, 1, 1, 1], [1, 1, 1, 1, 0], [1, 1, 1, 0, 1], [1, 1, 0, 0, 1], [0, 1, 1, 1, 1]];
        let ids: Vec<String> = (0..5).map(|i| format!("i{i}")).collect();
        let mut m = ResultMatrix::new(ids.clone(), 5);
        for (t, row) in passes.iter().enumerate() {
            m.insert(ids.iter().zip(row).map(|(id, &p)| rec(id, t as u32, p == 1, 1)));
        }
        assert_eq!(avg_pass_at_1(&m, Approach::Autoice, MetricPhase::Wp), 80.0);
    }
}
