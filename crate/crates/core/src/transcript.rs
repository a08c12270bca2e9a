//! JSON-lines event log of a synthesis run.
//!
//! Events carry a logical sequence number instead of wall-clock time so that
//! a replay with the same seed and fixtures is byte-identical.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::{Approach, Lineage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A two-phase initialization produced an individual.
    Initialized,
    /// Initialization stopped early because the call budget ran out.
    InitTruncated,
    Elite,
    Parents,
    Crossover,
    Mutation,
    MutationSkipped,
    GenerationComplete,
    BudgetExhausted,
    BaseCheck,
    WpCheck,
    Refinement,
    ZeroShot,
    Solved,
    NotSynthesized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq: u64,
    pub approach: Approach,
    pub kind: EventKind,
    pub generation: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<Lineage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<u8>,
    /// Ledger `used` at the time the event was logged.
    pub calls_used: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

/// Fields for one event; `seq` is filled in by [`Transcript::push`].
#[derive(Debug, Clone)]
pub struct Event {
    pub kind: EventKind,
    pub generation: u32,
    pub slot: Option<usize>,
    pub lineage: Option<Lineage>,
    pub fitness: Option<u8>,
    pub detail: Option<String>,
}

impl Event {
    pub fn new(kind: EventKind, generation: u32) -> Self {
        Self {
            kind,
            generation,
            slot: None,
            lineage: None,
            fitness: None,
            detail: None,
        }
    }

    pub fn slot(mut self, slot: usize) -> Self {
        self.slot = Some(slot);
        self
    }

    pub fn lineage(mut self, lineage: &Lineage) -> Self {
        self.lineage = Some(lineage.clone());
        self
    }

    pub fn fitness(mut self, fitness: u8) -> Self {
        self.fitness = Some(fitness);
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

impl Transcript {
    pub fn push(&mut self, approach: Approach, calls_used: u64, event: Event) {
        let seq = self.events.len() as u64;
        self.events.push(TranscriptEvent {
            seq,
            approach,
            kind: event.kind,
            generation: event.generation,
            slot: event.slot,
            lineage: event.lineage,
            fitness: event.fitness,
            calls_used,
            detail: event.detail,
        });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn kinds(&self) -> Vec<EventKind> {
        self.events.iter().map(|e| e.kind).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { events })
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl().as_bytes())?;
        f.flush()
    }
}
