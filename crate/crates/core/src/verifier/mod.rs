//! Candidate evaluation: the Frama-C base check (syntax and ACSL well-formedness),
//! the WP check (all proof goals discharged), a content-addressed outcome
//! cache, and a marker-driven mock for tests.

mod cache;
mod framac;
mod mock;

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Evaluation;

pub use cache::OutcomeCache;
pub use framac::{FramaCConfig, FramaCVerifier};
pub use mock::MockVerifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyPhase {
    Base,
    Wp,
}

impl VerifyPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::Wp => "wp",
        }
    }
}

/// The toolchain could not be run at all. Everything else (parse errors,
/// unproved goals, timeouts) is a failing report, not an error.
#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("verifier binary `{0}` not found")]
    MissingBinary(String),
    #[error("failed to run verifier: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub pass: bool,
    pub phase: VerifyPhase,
    #[serde(default)]
    pub goals_proved: Option<u64>,
    #[serde(default)]
    pub goals_total: Option<u64>,
    pub raw_output: String,
    pub exit_status: i32,
    pub duration_ms: u64,
    #[serde(default)]
    pub verifier_version: String,
}

impl VerifierReport {
    /// Failing report for something that never reached the toolchain.
    pub fn synthetic_failure(phase: VerifyPhase, message: impl Into<String>) -> Self {
        Self {
            pass: false,
            phase,
            goals_proved: None,
            goals_total: None,
            raw_output: message.into(),
            exit_status: -1,
            duration_ms: 0,
            verifier_version: String::new(),
        }
    }
}

/// Result of the two-phase evaluation. WP is only run when the base check
/// passes, hence `sem_pass ⇒ syn_pass`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierOutcome {
    pub syn_pass: bool,
    pub syn_report: VerifierReport,
    pub sem_pass: bool,
    pub sem_report: Option<VerifierReport>,
}

impl VerifierOutcome {
    pub fn fitness(&self) -> u8 {
        u8::from(self.syn_pass) + u8::from(self.sem_pass)
    }

    pub fn to_evaluation(&self) -> Evaluation {
        Evaluation {
            syn_pass: self.syn_pass,
            syn_report: self.syn_report.raw_output.clone(),
            sem_pass: self.sem_pass,
            sem_report: self
                .sem_report
                .as_ref()
                .map(|r| r.raw_output.clone())
                .unwrap_or_default(),
        }
    }
}

pub trait Verifier: Send + Sync {
    /// Base Frama-C run: parsing, typing and ACSL well-formedness.
    fn check_syntax(&self, code: &str) -> Result<VerifierReport, EnvironmentError>;

    /// WP run; passes only when every generated goal is proved and at least
    /// one goal exists.
    fn check_semantics(&self, code: &str) -> Result<VerifierReport, EnvironmentError>;

    /// Version string plus flag set. Part of every cache key, so changing the
    /// prover or a timeout invalidates cached reports.
    fn fingerprint(&self) -> String;
}

/// Base check, then WP only if the base check passed. Reports come from the
/// cache when available.
pub fn evaluate(
    verifier: &dyn Verifier,
    code: &str,
    cache: &OutcomeCache,
) -> Result<VerifierOutcome, EnvironmentError> {
    let syn_report = cache.check(verifier, VerifyPhase::Base, code)?;
    if !syn_report.pass {
        return Ok(VerifierOutcome {
            syn_pass: false,
            syn_report,
            sem_pass: false,
            sem_report: None,
        });
    }
    let sem_report = cache.check(verifier, VerifyPhase::Wp, code)?;
    Ok(VerifierOutcome {
        syn_pass: true,
        syn_report,
        sem_pass: sem_report.pass,
        sem_report: Some(sem_report),
    })
}

/// Extracts `Proved goals: X / Y` (last occurrence). `(0, 0)` when absent.
pub fn parse_goal_summary(raw_output: &str) -> (u64, u64) {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"Proved goals:\s*(\d+)\s*/\s*(\d+)").unwrap());
    re.captures_iter(raw_output)
        .last()
        .and_then(|c| Some((c[1].parse().ok()?, c[2].parse().ok()?)))
        .unwrap_or((0, 0))
}

/// WP verdict from a goal summary; zero-goal runs fail.
pub fn wp_verdict(proved: u64, total: u64) -> bool {
    total > 0 && proved == total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_summary_examples() {
        assert_eq!(parse_goal_summary("[wp] Proved goals:   12 / 12\n"), (12, 12));
        assert_eq!(
            parse_goal_summary("[wp] 12 goals scheduled\n[wp] Proved goals:    9 / 12\n  Qed: 4\n"),
            (9, 12)
        );
        assert_eq!(parse_goal_summary("[kernel] Parsing x.c\n"), (0, 0));
    }

    #[test]
    fn zero_goal_policy() {
        assert!(!wp_verdict(0, 0));
        assert!(!wp_verdict(3, 4));
        assert!(wp_verdict(4, 4));
    }

    #[test]
    fn evaluate_skips_wp_on_syntax_failure() {
        let v = MockVerifier::default();
        let cache = OutcomeCache::in_memory();
        let out = evaluate(&v, "int f( { SYNTAX_ERROR", &cache).unwrap();
        assert!(!out.syn_pass && !out.sem_pass);
        assert!(out.sem_report.is_none());
        assert_eq!(v.launches(), 1);
        let e = out.to_evaluation();
        assert_eq!(e.sem_report, "");
    }

    #[test]
    fn evaluate_is_cached_and_idempotent() {
        let v = MockVerifier::default();
        let cache = OutcomeCache::in_memory();
        let code = "/*@ ensures \\result == 0; VERIFIED */ int z(void){ return 0; }";
        let a = evaluate(&v, code, &cache).unwrap();
        assert_eq!(v.launches(), 2);
        let b = evaluate(&v, code, &cache).unwrap();
        assert_eq!(v.launches(), 2);
        assert_eq!(a, b);
        assert!(a.syn_pass && a.sem_pass);
        assert_eq!(a.fitness(), 2);
    }

    #[test]
    fn unannotated_code_is_not_verified() {
        let v = MockVerifier::default();
        let out = evaluate(&v, "int z(void){ return 0; }", &OutcomeCache::in_memory()).unwrap();
        assert!(out.syn_pass);
        assert!(!out.sem_pass);
        let sem = out.sem_report.unwrap();
        assert_eq!((sem.goals_proved, sem.goals_total), (Some(0), Some(0)));
    }
}
