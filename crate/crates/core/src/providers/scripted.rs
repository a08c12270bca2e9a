use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, PhaseTag, Provider, ProviderError};

/// One canned response. `seq: None` is the fallback for every sequence
/// number of that phase without an exact record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    pub phase: PhaseTag,
    #[serde(default)]
    pub seq: Option<u64>,
    pub text: String,
}

impl ScriptRecord {
    pub fn new(phase: PhaseTag, seq: Option<u64>, text: impl Into<String>) -> Self {
        Self {
            phase,
            seq,
            text: text.into(),
        }
    }
}

/// Deterministic provider keyed by `(phase, seq)`. Stateless with respect to
/// call order, so concurrent callers see the same answers as sequential ones.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    exact: HashMap<(PhaseTag, u64), String>,
    fallback: HashMap<PhaseTag, String>,
    log: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(records: impl IntoIterator<Item = ScriptRecord>) -> Self {
        let mut provider = Self::default();
        for r in records {
            match r.seq {
                Some(seq) => {
                    provider.exact.insert((r.phase, seq), r.text);
                }
                None => {
                    provider.fallback.insert(r.phase, r.text);
                }
            }
        }
        provider
    }

    /// Loads a JSON array of `{phase, seq, text}` records.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let records: Vec<ScriptRecord> = serde_json::from_str(text)?;
        Ok(Self::new(records))
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Same response for every phase and sequence number.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(
            PhaseTag::ALL
                .iter()
                .map(|&p| ScriptRecord::new(p, None, text.clone())),
        )
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("log poisoned").clone()
    }
}

impl Provider for ScriptedProvider {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.log.lock().expect("log poisoned").push(request.clone());
        let text = self
            .exact
            .get(&(request.phase, request.seq))
            .or_else(|| self.fallback.get(&request.phase))
            .ok_or(ProviderError::Unscripted {
                phase: request.phase,
                seq: request.seq,
            })?;
        Ok(ChatResponse {
            text: text.clone(),
            ..Default::default()
        })
    }

    fn model(&self) -> &str {
        "scripted"
    }
}
