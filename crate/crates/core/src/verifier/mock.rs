use std::sync::atomic::{AtomicUsize, Ordering};

use super::{parse_goal_summary, wp_verdict, EnvironmentError, Verifier, VerifierReport, VerifyPhase};

/// Drop-in verifier that classifies code by marker substrings instead of
/// running Frama-C.
///
/// - blank code, or code containing any `syntax_error_markers` entry, fails the
///   base check;
/// - code containing any `proof_markers` entry proves all of its goals;
/// - other annotated code (`/*@`) proves some goals but not all;
/// - code without annotations yields zero goals.
#[derive(Debug)]
pub struct MockVerifier {
    pub syntax_error_markers: Vec<String>,
    pub proof_markers: Vec<String>,
    pub version: String,
    launches: AtomicUsize,
}

impl Default for MockVerifier {
    fn default() -> Self {
        Self {
            syntax_error_markers: vec!["SYNTAX_ERROR".into(), "--->".into()],
            proof_markers: vec!["VERIFIED".into()],
            version: "mock-1".into(),
            launches: AtomicUsize::new(0),
        }
    }
}

impl MockVerifier {
    pub fn new(syntax_error_markers: Vec<String>, proof_markers: Vec<String>) -> Self {
        Self {
            syntax_error_markers,
            proof_markers,
            ..Default::default()
        }
    }

    /// Number of simulated tool invocations.
    pub fn launches(&self) -> usize {
        self.launches.load(Ordering::SeqCst)
    }

    fn syntax_ok(&self, code: &str) -> bool {
        !code.trim().is_empty() && !self.syntax_error_markers.iter().any(|m| code.contains(m.as_str()))
    }

    fn report(&self, phase: VerifyPhase, pass: bool, raw: String, goals: Option<(u64, u64)>) -> VerifierReport {
        VerifierReport {
            pass,
            phase,
            goals_proved: goals.map(|g| g.0),
            goals_total: goals.map(|g| g.1),
            raw_output: raw,
            exit_status: if pass || phase == VerifyPhase::Wp && goals.is_some() { 0 } else { 1 },
            duration_ms: 0,
            verifier_version: self.version.clone(),
        }
    }
}

const PARSE_ERROR: &str = "[kernel] Parsing candidate.c (with preprocessing)\n[kernel:annot-error] candidate.c:1: Warning: unexpected token\n[kernel] User Error: warning annot-error treated as fatal error.\n[kernel] Frama-C aborted: invalid user input.\n";

impl Verifier for MockVerifier {
    fn check_syntax(&self, code: &str) -> Result<VerifierReport, EnvironmentError> {
        self.launches.fetch_add(1, Ordering::SeqCst);
        Ok(if self.syntax_ok(code) {
            self.report(
                VerifyPhase::Base,
                true,
                "[kernel] Parsing candidate.c (with preprocessing)\n".into(),
                None,
            )
        } else {
            self.report(VerifyPhase::Base, false, PARSE_ERROR.into(), None)
        })
    }

    fn check_semantics(&self, code: &str) -> Result<VerifierReport, EnvironmentError> {
        self.launches.fetch_add(1, Ordering::SeqCst);
        if !self.syntax_ok(code) {
            return Ok(self.report(VerifyPhase::Wp, false, PARSE_ERROR.into(), None));
        }
        let raw = if self.proof_markers.iter().any(|m| code.contains(m.as_str())) {
            "[kernel] Parsing candidate.c (with preprocessing)\n[wp] 4 goals scheduled\n[wp] Proved goals:    4 / 4\n  Qed:               2\n  Alt-Ergo:          2\n"
        } else if code.contains("/*@") {
            "[kernel] Parsing candidate.c (with preprocessing)\n[wp] 4 goals scheduled\n[wp] [Timeout] typed_ensures (Qed 1ms) (Alt-Ergo)\n[wp] [Timeout] typed_loop_invariant_preserved (Alt-Ergo)\n[wp] Proved goals:    2 / 4\n  Qed:               2\n  Timeout:           2\n"
        } else {
            "[kernel] Parsing candidate.c (with preprocessing)\n[wp] Warning: No goal generated\n[wp] Proved goals:    0 / 0\n"
        };
        let (proved, total) = parse_goal_summary(raw);
        Ok(self.report(VerifyPhase::Wp, wp_verdict(proved, total), raw.into(), Some((proved, total))))
    }

    fn fingerprint(&self) -> String {
        format!(
            "{} syntax={:?} proof={:?}",
            self.version, self.syntax_error_markers, self.proof_markers
        )
    }
}
