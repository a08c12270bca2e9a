//! JSON configuration file shared by the CLI subcommands.
//!
//! ```json
//! {
//!   "provider":  {"kind": "http", "endpoint": "...", "model": "..."},
//!   "verifier":  {"kind": "frama_c", "wp_timeout_secs": 10},
//!   "evolution": {"p_init": 5, "n_elite": 2, "mutate_rate": 0.5, "max_gen": 5},
//!   "baseline":  {"max_iter": 38}
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::prompts::PromptSet;
use crate::providers::{HttpProvider, HttpProviderConfig, Provider, ScriptedProvider};
use crate::types::{ConfigError, EvolutionConfig};
use crate::verifier::{EnvironmentError, FramaCConfig, FramaCVerifier, MockVerifier, OutcomeCache, Verifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSettings {
    Http(HttpProviderConfig),
    /// Canned responses from a JSON fixture file.
    Scripted { fixture: PathBuf },
}

impl Default for ProviderSettings {
    fn default() -> Self {
        Self::Http(HttpProviderConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifierSettings {
    FramaC(FramaCConfig),
    Mock {
        #[serde(default = "default_syntax_markers")]
        syntax_error_markers: Vec<String>,
        #[serde(default = "default_proof_markers")]
        proof_markers: Vec<String>,
    },
}

fn default_syntax_markers() -> Vec<String> {
    MockVerifier::default().syntax_error_markers
}

fn default_proof_markers() -> Vec<String> {
    MockVerifier::default().proof_markers
}

impl Default for VerifierSettings {
    fn default() -> Self {
        Self::FramaC(FramaCConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub provider: ProviderSettings,
    pub verifier: VerifierSettings,
    pub evolution: EvolutionConfig,
    /// When absent, `max_iter` is matched to the engine's expected calls.
    pub baseline: Option<BaselineConfig>,
    /// Directory of `<template>.txt` overrides.
    pub prompts_dir: Option<PathBuf>,
    /// Persistent verifier cache.
    pub cache_dir: Option<PathBuf>,
    /// Instances run concurrently by `bench`.
    pub workers: Option<usize>,
}

impl AppConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: AppConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::new(format!("config: {e}")))?;
        config.resolve_paths(base_dir);
        config.evolution.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ProviderSettings::Scripted { fixture } = &mut self.provider {
            fix(fixture);
        }
        if let Some(p) = &mut self.prompts_dir {
            fix(p);
        }
        if let Some(p) = &mut self.cache_dir {
            fix(p);
        }
    }

    pub fn baseline(&self) -> Result<BaselineConfig, ConfigError> {
        match &self.baseline {
            Some(b) => Ok(b.clone()),
            None => BaselineConfig::matched_to(&self.evolution),
        }
    }

    pub fn build_provider(&self) -> Result<Box<dyn Provider>, ConfigError> {
        Ok(match &self.provider {
            ProviderSettings::Http(c) => Box::new(HttpProvider::new(c.clone())),
            ProviderSettings::Scripted { fixture } => Box::new(
                ScriptedProvider::from_file(fixture)
                    .map_err(|e| ConfigError::new(format!("{}: {e}", fixture.display())))?,
            ),
        })
    }

    pub fn build_verifier(&self) -> Result<Box<dyn Verifier>, EnvironmentError> {
        Ok(match &self.verifier {
            VerifierSettings::FramaC(c) => Box::new(FramaCVerifier::new(c.clone())?),
            VerifierSettings::Mock {
                syntax_error_markers,
                proof_markers,
            } => Box::new(MockVerifier::new(
                syntax_error_markers.clone(),
                proof_markers.clone(),
            )),
        })
    }

    pub fn build_prompts(&self) -> Result<PromptSet, ConfigError> {
        match &self.prompts_dir {
            Some(dir) => PromptSet::load_dir(dir),
            None => Ok(PromptSet::default()),
        }
    }

    pub fn build_cache(&self) -> Result<OutcomeCache, ConfigError> {
        match &self.cache_dir {
            Some(dir) => OutcomeCache::with_dir(dir)
                .map_err(|e| ConfigError::new(format!("{}: {e}", dir.display()))),
            None => Ok(OutcomeCache::in_memory()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_resolves_paths() {
        let text = r#"{
            "provider": {"kind": "scripted", "fixture": "fx.json"},
            "verifier": {"kind": "mock"},
            "evolution": {"max_gen": 3, "seed": 9}
        }"#;
        let c = AppConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(
            c.provider,
            ProviderSettings::Scripted {
                fixture: PathBuf::from("/cfg/fx.json")
            }
        );
        assert_eq!(c.evolution.max_gen, 3);
        assert_eq!(c.evolution.p_init, 5);
        assert_eq!(c.baseline().unwrap().max_iter, 2 * 5 + 3 * 4 * 3 / 2 - 2);
        assert!(matches!(c.verifier, VerifierSettings::Mock { ref proof_markers, .. } if proof_markers == &["VERIFIED"]));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(AppConfig::parse(r#"{"evolution": {"n_elite": 9}}"#, Path::new(".")).is_err());
        assert!(AppConfig::parse(r#"{"bogus": 1}"#, Path::new(".")).is_err());
        let c = AppConfig::parse("{}", Path::new(".")).unwrap();
        assert!(matches!(c.provider, ProviderSettings::Http(_)));
        assert!(matches!(c.verifier, VerifierSettings::FramaC(_)));
    }
}
