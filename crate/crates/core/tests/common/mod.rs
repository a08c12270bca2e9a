#![allow(dead_code)]
pub mod reference;

use evoverif_core::evolve::SearchContext;
use evoverif_core::prompts::PromptSet;
use evoverif_core::providers::{PhaseTag, ScriptRecord, ScriptedProvider};
use evoverif_core::verifier::{MockVerifier, OutcomeCache};
use evoverif_core::{Requirement, Variant};

/// Plain C without annotations (phase-1 output).
pub const PLAIN_C: &str = "int arraymax(int *a, int n) {\n  int max = a[0];\n  for (int i = 1; i < n; i++)\n    if (a[i] > max) max = a[i];\n  return max;\n}";

/// Annotated, parses, proves only part of its goals under the mock: fitness 1.
pub const PARTIAL: &str = "/*@ requires n > 0;\n    assigns \\nothing;\n    ensures \\forall integer k; 0 <= k < n ==> \\result >= a[k];\n*/\nint arraymax(int *a, int n) {\n  int max = a[0];\n  /*@ loop invariant 1 <= i < n; */\n  for (int i = 1; i < n; i++)\n    if (a[i] > max) max = a[i];\n  return max;\n}";

/// Fitness 2 under the mock (proof marker).
pub const PROVED: &str = "/*@ requires n > 0;\n    assigns \\nothing;\n    ensures \\forall integer k; 0 <= k < n ==> \\result >= a[k];\n*/\nint arraymax(int *a, int n) {\n  // VERIFIED\n  int max = a[0];\n  return max;\n}";

/// Fails the base check under the mock.
pub const BROKEN: &str = "/*@ ensures \\result >= 0 ---> \\true; */\nint f(void) { return 0; }";

pub fn fenced(code: &str) -> String {
    format!("Here is the program.\n```c\n{code}\n```\n")
}

pub fn rec(phase: PhaseTag, seq: Option<u64>, code: &str) -> ScriptRecord {
    ScriptRecord::new(phase, seq, fenced(code))
}

/// Every phase answers with fitness-1 code unless overridden by `extra`.
pub fn never_solving(extra: Vec<ScriptRecord>) -> ScriptedProvider {
    let mut records = vec![
        rec(PhaseTag::InitCode, None, PLAIN_C),
        rec(PhaseTag::InitSpec, None, PARTIAL),
        rec(PhaseTag::Crossover, None, PARTIAL),
        rec(PhaseTag::Mutation, None, PARTIAL),
        rec(PhaseTag::Refinement, None, PARTIAL),
        rec(PhaseTag::ZeroShot, None, PARTIAL),
    ];
    records.extend(extra);
    ScriptedProvider::new(records)
}

pub fn requirement(id: &str) -> Requirement {
    Requirement::new(
        id,
        "Write a C function arraymax that returns the largest element of a non-empty integer array of length n.",
        Variant::Original,
        "scripted",
    )
    .unwrap()
}

pub struct Fixture {
    pub verifier: MockVerifier,
    pub cache: OutcomeCache,
    pub prompts: PromptSet,
}

impl Fixture {
    pub fn new() -> Self {
        Self {
            verifier: MockVerifier::default(),
            cache: OutcomeCache::in_memory(),
            prompts: PromptSet::default(),
        }
    }

    pub fn ctx<'a>(&'a self, provider: &'a ScriptedProvider) -> SearchContext<'a> {
        SearchContext {
            provider,
            verifier: &self.verifier,
            cache: &self.cache,
            prompts: &self.prompts,
        }
    }
}
