use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{avg_calls, avg_pass_at_1, coverage, pass_at_1, pass_at_5, MetricPhase};
use super::ResultMatrix;
use crate::types::{Approach, ConfigError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Pass@1 is read from this trial index.
const PASS_AT_1_TRIAL: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(ConfigError::new(format!("unknown report format `{other}`"))),
        }
    }
}

/// One (approach, dataset) row. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub approach: Approach,
    pub dataset: String,
    pub instances: usize,
    pub records: usize,
    pub avg_pass_at_1_fc: f64,
    pub avg_pass_at_1_wp: f64,
    pub pass_at_1_fc: f64,
    pub pass_at_1_wp: f64,
    pub pass_at_5_fc: f64,
    pub pass_at_5_wp: f64,
    pub avg_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JsonReport {
    schema_version: u32,
    pass_at_1_trial: u32,
    n_trials: u32,
    rows: Vec<SummaryRow>,
}

/// Rows ordered by approach, then dataset name.
pub fn summarize(m: &ResultMatrix) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for approach in m.approaches() {
        for dataset in m.datasets() {
            let sub = m.subset(&dataset);
            let cov = coverage(&sub, approach);
            if cov.present == 0 {
                continue;
            }
            rows.push(SummaryRow {
                approach,
                dataset: dataset.clone(),
                instances: sub.instances.len(),
                records: cov.present,
                avg_pass_at_1_fc: avg_pass_at_1(&sub, approach, MetricPhase::Fc),
                avg_pass_at_1_wp: avg_pass_at_1(&sub, approach, MetricPhase::Wp),
                pass_at_1_fc: pass_at_1(&sub, approach, PASS_AT_1_TRIAL, MetricPhase::Fc),
                pass_at_1_wp: pass_at_1(&sub, approach, PASS_AT_1_TRIAL, MetricPhase::Wp),
                pass_at_5_fc: pass_at_5(&sub, approach, MetricPhase::Fc),
                pass_at_5_wp: pass_at_5(&sub, approach, MetricPhase::Wp),
                avg_calls: avg_calls(&sub, approach),
            });
        }
    }
    rows
}

pub fn render_report(m: &ResultMatrix, format: ReportFormat) -> String {
    let rows = summarize(m);
    match format {
        ReportFormat::Json => {
            let report = JsonReport {
                schema_version: REPORT_SCHEMA_VERSION,
                pass_at_1_trial: PASS_AT_1_TRIAL,
                n_trials: m.n_trials,
                rows,
            };
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row).expect("row serializes");
            }
            if rows.is_empty() {
                // keep the header even for an empty matrix
                w.write_record([
                    "approach", "dataset", "instances", "records", "avg_pass_at_1_fc",
                    "avg_pass_at_1_wp", "pass_at_1_fc", "pass_at_1_wp", "pass_at_5_fc",
                    "pass_at_5_wp", "avg_calls",
                ])
                .expect("header");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        ReportFormat::Markdown => markdown(m, &rows),
    }
}

fn markdown(m: &ResultMatrix, rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Pass@1 uses trial {PASS_AT_1_TRIAL}; averages and Pass@{} cover {} trial(s).\n",
        m.n_trials, m.n_trials
    );
    s.push_str("| Approach | Dataset | Avg Pass@1 FC | Avg Pass@1 WP | Pass@1 FC | Pass@1 WP | Pass@k FC | Pass@k WP | Avg calls |\n");
    s.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
            r.approach,
            r.dataset,
            r.avg_pass_at_1_fc,
            r.avg_pass_at_1_wp,
            r.pass_at_1_fc,
            r.pass_at_1_wp,
            r.pass_at_5_fc,
            r.pass_at_5_wp,
            r.avg_calls
        );
    }
    s
}

pub fn emit_report(m: &ResultMatrix, format: ReportFormat, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_report(m, format))
}
