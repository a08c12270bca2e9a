//! LLM access: request/response types, the call-budget ledger, response code
//! extraction, and the HTTP and scripted providers.

mod extract;
mod http;
mod ledger;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_code, ExtractionError};
pub use http::{HttpProvider, HttpProviderConfig, API_KEY_ENV};
pub use ledger::{BudgetExhausted, BudgetLedger, LedgerSnapshot, Reservation};
pub use scripted::{ScriptRecord, ScriptedProvider};

/// Which pipeline step issued a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTag {
    InitCode,
    InitSpec,
    Crossover,
    Mutation,
    Refinement,
    ZeroShot,
}

impl PhaseTag {
    pub const ALL: [PhaseTag; 6] = [
        Self::InitCode,
        Self::InitSpec,
        Self::Crossover,
        Self::Mutation,
        Self::Refinement,
        Self::ZeroShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::InitCode => "init_code",
            Self::InitSpec => "init_spec",
            Self::Crossover => "crossover",
            Self::Mutation => "mutation",
            Self::Refinement => "refinement",
            Self::ZeroShot => "zero_shot",
        }
    }
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub phase: PhaseTag,
    /// Per-phase sequence number, assigned by the caller in a deterministic
    /// order. Only the scripted provider looks at it.
    pub seq: u64,
}

impl ChatRequest {
    pub fn new(phase: PhaseTag, seq: u64, prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            model: String::new(),
            temperature: 1.0,
            max_tokens: None,
            phase,
            seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed endpoint reply: {0}")]
    Malformed(String),
    #[error("no scripted response for ({phase}, seq {seq})")]
    Unscripted { phase: PhaseTag, seq: u64 },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error(transparent)]
    BudgetExhausted(#[from] BudgetExhausted),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Something that turns a prompt into text. Implementations handle their own
/// retries; budget accounting lives in [`complete`].
pub trait Provider: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    /// Model identifier recorded in transcripts.
    fn model(&self) -> &str {
        ""
    }
}

/// Reserves a ledger slot, sends the request, and keeps the slot only if a
/// response came back.
pub fn complete(
    provider: &dyn Provider,
    request: &ChatRequest,
    ledger: &BudgetLedger,
) -> Result<ChatResponse, LlmError> {
    let reservation = ledger.reserve(request.phase)?;
    complete_reserved(provider, request, reservation)
}

/// Same as [`complete`] for a slot reserved earlier (e.g. on the control
/// thread, before fanning calls out to workers).
pub fn complete_reserved(
    provider: &dyn Provider,
    request: &ChatRequest,
    reservation: Reservation<'_>,
) -> Result<ChatResponse, LlmError> {
    let response = provider.send(request)?;
    reservation.commit();
    Ok(response)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_call_increments_ledger() {
        let provider = ScriptedProvider::new(vec![ScriptRecord::new(
            PhaseTag::InitCode,
            Some(0),
            "int f(void){return 0;}",
        )]);
        let ledger = BudgetLedger::new(3);
        let resp = complete(&provider, &ChatRequest::new(PhaseTag::InitCode, 0, "p"), &ledger).unwrap();
        assert_eq!(resp.text, "int f(void){return 0;}");
        assert_eq!(ledger.used(), 1);
    }

    #[test]
    fn exhausted_ledger_leaves_count_unchanged() {
        let provider = ScriptedProvider::new(vec![ScriptRecord::new(PhaseTag::InitCode, None, "x")]);
        let ledger = BudgetLedger::new(0);
        let err = complete(&provider, &ChatRequest::new(PhaseTag::InitCode, 0, "p"), &ledger).unwrap_err();
        assert!(matches!(err, LlmError::BudgetExhausted(_)));
        assert_eq!(ledger.used(), 0);
    }

    #[test]
    fn provider_error_does_not_count() {
        let provider = ScriptedProvider::new(vec![]);
        let ledger = BudgetLedger::new(3);
        let err = complete(&provider, &ChatRequest::new(PhaseTag::Mutation, 4, "p"), &ledger).unwrap_err();
        assert_eq!(
            err,
            LlmError::Provider(ProviderError::Unscripted {
                phase: PhaseTag::Mutation,
                seq: 4
            })
        );
        assert_eq!(ledger.used(), 0);
    }
}
