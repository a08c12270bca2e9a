use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use super::{EnvironmentError, Verifier, VerifierReport, VerifyPhase};

/// Per-phase report cache keyed by `sha256(fingerprint, phase, code)`.
///
/// Optionally backed by a directory of `<key>.json` files that may be deleted
/// at any time. Concurrent lookups are fine; a duplicate in-flight check of
/// the same key simply runs twice and stores the same report.
#[derive(Debug, Default)]
pub struct OutcomeCache {
    memory: RwLock<HashMap<String, VerifierReport>>,
    dir: Option<PathBuf>,
}

impl OutcomeCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            memory: RwLock::default(),
            dir: Some(dir),
        })
    }

    pub fn key(fingerprint: &str, phase: VerifyPhase, code: &str) -> String {
        let mut h = Sha256::new();
        h.update(fingerprint.as_bytes());
        h.update([0]);
        h.update(phase.as_str().as_bytes());
        h.update([0]);
        h.update(code.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn len(&self) -> usize {
        self.memory.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<VerifierReport> {
        if let Some(r) = self.memory.read().expect("cache poisoned").get(key) {
            return Some(r.clone());
        }
        let path = self.path_for(key)?;
        let text = std::fs::read_to_string(path).ok()?;
        let report: VerifierReport = serde_json::from_str(&text).ok()?;
        self.memory
            .write()
            .expect("cache poisoned")
            .insert(key.to_string(), report.clone());
        Some(report)
    }

    pub fn put(&self, key: &str, report: &VerifierReport) {
        if let Some(path) = self.path_for(key) {
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            let written = serde_json::to_vec_pretty(report)
                .map_err(std::io::Error::other)
                .and_then(|bytes| std::fs::write(&tmp, bytes))
                .and_then(|_| std::fs::rename(&tmp, &path));
            if let Err(e) = written {
                log::warn!("could not persist cache entry {}: {e}", path.display());
            }
        }
        self.memory
            .write()
            .expect("cache poisoned")
            .insert(key.to_string(), report.clone());
    }

    /// Cached report for `(phase, code)`, running the verifier on a miss.
    pub fn check(
        &self,
        verifier: &dyn Verifier,
        phase: VerifyPhase,
        code: &str,
    ) -> Result<VerifierReport, EnvironmentError> {
        let key = Self::key(&verifier.fingerprint(), phase, code);
        if let Some(hit) = self.get(&key) {
            return Ok(hit);
        }
        let report = match phase {
            VerifyPhase::Base => verifier.check_syntax(code)?,
            VerifyPhase::Wp => verifier.check_semantics(code)?,
        };
        self.put(&key, &report);
        Ok(report)
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_deref().map(|d: &Path| d.join(format!("{key}.json")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::MockVerifier;

    #[test]
    fn key_depends_on_every_component() {
        let base = OutcomeCache::key("fc 31.0 -wp-timeout 10", VerifyPhase::Wp, "int x;");
        assert_ne!(base, OutcomeCache::key("fc 31.0 -wp-timeout 20", VerifyPhase::Wp, "int x;"));
        assert_ne!(base, OutcomeCache::key("fc 31.0 -wp-timeout 10", VerifyPhase::Base, "int x;"));
        assert_ne!(base, OutcomeCache::key("fc 31.0 -wp-timeout 10", VerifyPhase::Wp, "int y;"));
    }

    #[test]
    fn directory_persistence() {
        let dir = tempfile::tempdir().unwrap();
        let v = MockVerifier::default();
        let code = "/*@ VERIFIED */ int f(void){return 1;}";
        {
            let cache = OutcomeCache::with_dir(dir.path()).unwrap();
            cache.check(&v, VerifyPhase::Base, code).unwrap();
        }
        assert_eq!(v.launches(), 1);
        let cache = OutcomeCache::with_dir(dir.path()).unwrap();
        cache.check(&v, VerifyPhase::Base, code).unwrap();
        assert_eq!(v.launches(), 1);
        // deleting the directory contents only costs a re-run
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            std::fs::remove_file(entry.unwrap().path()).unwrap();
        }
        let fresh = OutcomeCache::with_dir(dir.path()).unwrap();
        fresh.check(&v, VerifyPhase::Base, code).unwrap();
        assert_eq!(v.launches(), 2);
    }
}
