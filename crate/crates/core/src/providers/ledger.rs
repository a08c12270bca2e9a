use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PhaseTag;

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("LLM call budget exhausted ({used}/{cap})")]
pub struct BudgetExhausted {
    pub used: u64,
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub cap: u64,
    pub used: u64,
    pub per_phase: BTreeMap<PhaseTag, u64>,
}

/// Shared LLM-call counter with a hard cap.
///
/// A call first reserves a slot (atomic check-and-increment); the slot is kept
/// when the reservation is committed and handed back when it is dropped
/// uncommitted, so a failed transport never counts.
#[derive(Debug)]
pub struct BudgetLedger {
    state: Mutex<LedgerSnapshot>,
}

impl BudgetLedger {
    pub fn new(cap: u64) -> Self {
        Self {
            state: Mutex::new(LedgerSnapshot {
                cap,
                used: 0,
                per_phase: BTreeMap::new(),
            }),
        }
    }

    pub fn reserve(&self, phase: PhaseTag) -> Result<Reservation<'_>, BudgetExhausted> {
        let mut s = self.state.lock().expect("ledger poisoned");
        if s.used >= s.cap {
            return Err(BudgetExhausted {
                used: s.used,
                cap: s.cap,
            });
        }
        s.used += 1;
        *s.per_phase.entry(phase).or_insert(0) += 1;
        Ok(Reservation {
            ledger: self,
            phase,
            committed: false,
        })
    }

    pub fn used(&self) -> u64 {
        self.state.lock().expect("ledger poisoned").used
    }

    pub fn cap(&self) -> u64 {
        self.state.lock().expect("ledger poisoned").cap
    }

    pub fn remaining(&self) -> u64 {
        let s = self.state.lock().expect("ledger poisoned");
        s.cap - s.used
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        self.state.lock().expect("ledger poisoned").clone()
    }

    fn release(&self, phase: PhaseTag) {
        let mut s = self.state.lock().expect("ledger poisoned");
        s.used -= 1;
        if let Some(n) = s.per_phase.get_mut(&phase) {
            *n -= 1;
            if *n == 0 {
                s.per_phase.remove(&phase);
            }
        }
    }
}

#[must_use = "an uncommitted reservation is released on drop"]
#[derive(Debug)]
pub struct Reservation<'a> {
    ledger: &'a BudgetLedger,
    phase: PhaseTag,
    committed: bool,
}

impl Reservation<'_> {
    pub fn phase(&self) -> PhaseTag {
        self.phase
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Reservation<'_> {
    fn drop(&mut self) {
        if !self.committed {
            self.ledger.release(self.phase);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn reserve_commit_release() {
        let ledger = BudgetLedger::new(2);
        ledger.reserve(PhaseTag::InitCode).unwrap().commit();
        assert_eq!(ledger.used(), 1);
        drop(ledger.reserve(PhaseTag::Crossover).unwrap());
        assert_eq!(ledger.used(), 1);
        assert!(!ledger.snapshot().per_phase.contains_key(&PhaseTag::Crossover));
        ledger.reserve(PhaseTag::Mutation).unwrap().commit();
        let err = ledger.reserve(PhaseTag::Mutation).unwrap_err();
        assert_eq!(err, BudgetExhausted { used: 2, cap: 2 });
        assert_eq!(ledger.used(), 2);
    }

    #[test]
    fn concurrent_reservations_never_exceed_cap() {
        let ledger = Arc::new(BudgetLedger::new(37));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let ledger = Arc::clone(&ledger);
                s.spawn(move || {
                    for i in 0..20 {
                        if let Ok(r) = ledger.reserve(PhaseTag::Crossover) {
                            assert!(ledger.used() <= 37);
                            if i % 3 != 0 {
                                r.commit();
                            }
                        }
                    }
                });
            }
        });
        let snap = ledger.snapshot();
        assert!(snap.used <= 37);
        assert_eq!(snap.used, snap.per_phase.values().sum::<u64>());
    }
}
