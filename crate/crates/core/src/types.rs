//! Domain types shared across the engine, baselines and harness, plus the
//! closed-form population-size and fitness formulas.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Invalid configuration values (bad hyperparameters, empty registries, ...).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// An operation was applied to a value in the wrong lifecycle state.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("individual has not been evaluated")]
    Unevaluated,
    #[error("population is empty")]
    EmptyPopulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Original,
    DeveloperFriendly,
}

/// One natural-language synthesis task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub dataset: String,
}

impl Requirement {
    /// Builds a requirement, rejecting blank text.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        variant: Variant,
        dataset: impl Into<String>,
    ) -> Result<Self, ConfigError> {
        let req = Self {
            id: id.into(),
            text: text.into(),
            variant,
            dataset: dataset.into(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.text.trim().is_empty() {
            return Err(ConfigError::new(format!(
                "requirement `{}` has empty text",
                self.id
            )));
        }
        Ok(())
    }
}

/// Synthesis approach: the evolutionary search or one of the two baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Autoice,
    ZeroShot,
    LlmVerifier,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Self::Autoice, Self::ZeroShot, Self::LlmVerifier];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Autoice => "autoice",
            Self::ZeroShot => "zero_shot",
            Self::LlmVerifier => "llm_verifier",
        }
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Approach {
    type Err = ConfigError;

    /// Accepts the canonical names and the short CLI aliases `zs` / `llmver`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "autoice" => Ok(Self::Autoice),
            "zs" | "zero_shot" => Ok(Self::ZeroShot),
            "llmver" | "llm_verifier" => Ok(Self::LlmVerifier),
            other => Err(ConfigError::new(format!("unknown approach `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Init,
    Crossover,
    Mutation,
    Refinement,
    ZeroShot,
}

/// Where an individual came from. Not part of the search state proper; kept
/// so transcripts can be audited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub origin: Origin,
    pub generation: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy_tag: Option<String>,
}

impl Lineage {
    pub fn new(origin: Origin, generation: u32) -> Self {
        Self {
            origin,
            generation,
            strategy_tag: None,
        }
    }

    pub fn with_strategy(mut self, tag: impl Into<String>) -> Self {
        self.strategy_tag = Some(tag.into());
        self
    }
}

/// Verdicts and diagnostics attached to a candidate after verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub syn_pass: bool,
    pub syn_report: String,
    pub sem_pass: bool,
    pub sem_report: String,
}

impl Evaluation {
    /// Failing evaluation with a synthetic base-phase diagnostic, used when a
    /// candidate could not even be produced (no code block, provider failure).
    pub fn synthetic_failure(reason: impl Into<String>) -> Self {
        Self {
            syn_pass: false,
            syn_report: reason.into(),
            sem_pass: false,
            sem_report: String::new(),
        }
    }
}

/// A candidate program: ACSL-annotated C source plus its verification state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    pub lineage: Lineage,
}

impl Individual {
    pub fn unevaluated(code: impl Into<String>, lineage: Lineage) -> Self {
        Self {
            code: code.into(),
            evaluation: None,
            lineage,
        }
    }

    /// Pairs code with its verification result. `sem_pass` is forced false when
    /// `syn_pass` is false so the sem ⇒ syn invariant always holds.
    pub fn evaluated(code: impl Into<String>, mut evaluation: Evaluation, lineage: Lineage) -> Self {
        evaluation.sem_pass &= evaluation.syn_pass;
        Self {
            code: code.into(),
            evaluation: Some(evaluation),
            lineage,
        }
    }

    pub fn syn_pass(&self) -> bool {
        self.evaluation.as_ref().is_some_and(|e| e.syn_pass)
    }

    pub fn sem_pass(&self) -> bool {
        self.evaluation.as_ref().is_some_and(|e| e.sem_pass)
    }

    pub fn fitness(&self) -> Result<u8, StateError> {
        fitness(self)
    }

    pub fn is_solution(&self) -> Result<bool, StateError> {
        is_solution(self)
    }
}

/// Number of passed verification phases, 0..=2.
pub fn fitness(ind: &Individual) -> Result<u8, StateError> {
    let eval = ind.evaluation.as_ref().ok_or(StateError::Unevaluated)?;
    Ok(u8::from(eval.syn_pass) + u8::from(eval.sem_pass))
}

pub fn is_solution(ind: &Individual) -> Result<bool, StateError> {
    Ok(fitness(ind)? == 2)
}

/// Fixed population size: elites plus an even number of offspring, rounded up
/// so that it is never below `p_init`.
pub fn population_size(p_init: u32, n_elite: u32) -> Result<u32, ConfigError> {
    if n_elite > p_init {
        return Err(ConfigError::new(format!(
            "n_elite ({n_elite}) must not exceed p_init ({p_init})"
        )));
    }
    Ok(n_elite + (p_init - n_elite).div_ceil(2) * 2)
}

/// Search hyperparameters. Defaults are the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub p_init: u32,
    pub n_elite: u32,
    pub mutate_rate: f64,
    pub max_gen: u32,
    /// `None` means the deterministic worst case, see [`EvolutionConfig::call_cap`].
    pub hard_call_cap: Option<u64>,
    pub seed: u64,
    pub temperature: f64,
    pub eager_stop: bool,
    pub llm_parallelism: usize,
    pub verifier_parallelism: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            p_init: 5,
            n_elite: 2,
            mutate_rate: 0.5,
            max_gen: 5,
            hard_call_cap: None,
            seed: 0,
            temperature: 1.0,
            eager_stop: false,
            llm_parallelism: 1,
            verifier_parallelism: 1,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.p_init < 1 {
            return Err(ConfigError::new("p_init must be at least 1"));
        }
        population_size(self.p_init, self.n_elite)?;
        if !(0.0..=1.0).contains(&self.mutate_rate) || self.mutate_rate.is_nan() {
            return Err(ConfigError::new(format!(
                "mutate_rate must lie in [0, 1], got {}",
                self.mutate_rate
            )));
        }
        if self.temperature < 0.0 || self.temperature.is_nan() {
            return Err(ConfigError::new("temperature must be non-negative"));
        }
        if self.llm_parallelism < 1 || self.verifier_parallelism < 1 {
            return Err(ConfigError::new("parallelism settings must be at least 1"));
        }
        Ok(())
    }

    /// Population size after every completed generation.
    pub fn population(&self) -> Result<u32, ConfigError> {
        population_size(self.p_init, self.n_elite)
    }

    /// Upper bound on LLM calls. Defaults to the run where every offspring is
    /// mutated: `2·p_init + max_gen·(P − n_elite)·2`.
    pub fn call_cap(&self) -> Result<u64, ConfigError> {
        if let Some(cap) = self.hard_call_cap {
            return Ok(cap);
        }
        let offspring = u64::from(self.population()? - self.n_elite);
        Ok(2 * u64::from(self.p_init) + u64::from(self.max_gen) * offspring * 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(syn: bool, sem: bool) -> Individual {
        Individual::evaluated(
            "int f(void){return 0;}",
            Evaluation {
                syn_pass: syn,
                syn_report: String::new(),
                sem_pass: sem,
                sem_report: String::new(),
            },
            Lineage::new(Origin::Init, 0),
        )
    }

    #[test]
    fn population_size_examples() {
        assert_eq!(population_size(5, 2).unwrap(), 6);
        assert_eq!(population_size(3, 3).unwrap(), 3);
        assert_eq!(population_size(6, 2).unwrap(), 6);
        assert!(population_size(2, 3).is_err());
    }

    #[test]
    fn fitness_examples() {
        assert_eq!(fitness(&ind(true, true)).unwrap(), 2);
        assert_eq!(fitness(&ind(true, false)).unwrap(), 1);
        assert_eq!(fitness(&ind(false, false)).unwrap(), 0);
        assert!(is_solution(&ind(true, true)).unwrap());
        assert!(!is_solution(&ind(true, false)).unwrap());
        assert!(!is_solution(&ind(false, false)).unwrap());
    }

    #[test]
    fn sem_without_syn_is_clamped() {
        let i = ind(false, true);
        assert!(!i.sem_pass());
        assert_eq!(i.fitness().unwrap(), 0);
    }

    #[test]
    fn unevaluated_fitness_is_state_error() {
        let i = Individual::unevaluated("x", Lineage::new(Origin::Init, 0));
        assert_eq!(fitness(&i), Err(StateError::Unevaluated));
        assert_eq!(is_solution(&i), Err(StateError::Unevaluated));
    }

    #[test]
    fn default_call_cap_is_worst_case() {
        let cfg = EvolutionConfig::default();
        assert_eq!(cfg.call_cap().unwrap(), 50);
        let cfg = EvolutionConfig {
            hard_call_cap: Some(12),
            ..Default::default()
        };
        assert_eq!(cfg.call_cap().unwrap(), 12);
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::default().validate().is_ok());
        let bad = EvolutionConfig {
            n_elite: 6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig {
            mutate_rate: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig {
            p_init: 0,
            n_elite: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn blank_requirement_rejected() {
        assert!(Requirement::new("a", "   ", Variant::Original, "d").is_err());
        assert!(Requirement::new("a", "sum", Variant::Original, "d").is_ok());
    }

    proptest::proptest! {
        #[test]
        fn population_size_properties(p in 0u32..200, e in 0u32..200) {
            proptest::prop_assume!(e <= p);
            let size = population_size(p, e).unwrap();
            proptest::prop_assert!(size == p || size == p + 1);
            proptest::prop_assert_eq!((size - e) % 2, 0);
            if p < 199 {
                proptest::prop_assert!(population_size(p + 1, e).unwrap() >= size);
            }
        }

        #[test]
        fn fitness_counts_flags(syn: bool, sem: bool) {
            let i = ind(syn, sem);
            let expected = u8::from(syn) + u8::from(syn && sem);
            proptest::prop_assert_eq!(i.fitness().unwrap(), expected);
            proptest::prop_assert_eq!(i.fitness().unwrap() == 2, i.sem_pass());
        }
    }
}
