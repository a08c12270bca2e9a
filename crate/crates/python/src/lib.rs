//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use std::path::PathBuf;

use evoverif_core::baselines::{self, llm_verifier, zero_shot};
use evoverif_core::config::AppConfig;
use evoverif_core::evolve::{self, RunError, SearchContext};
use evoverif_core::harness::{self, MetricPhase, ReportFormat, ResultMatrix, SweepConfig};
use evoverif_core::prompts::PromptSet;
use evoverif_core::providers::{self, Provider};
use evoverif_core::verifier::{self, OutcomeCache, Verifier};
use evoverif_core::{Approach, ConfigError, Requirement, Variant};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn config_err(e: ConfigError) -> PyErr {
    PyValueError::new_err(e.0)
}

fn run_err(e: RunError) -> PyErr {
    match e {
        RunError::Config(c) => config_err(c),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = ConfigError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(config_err)
}

fn matrix(records_jsonl: &str, n_trials: Option<u32>) -> PyResult<ResultMatrix> {
    ResultMatrix::from_jsonl(records_jsonl, n_trials).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn phase(name: &str) -> PyResult<MetricPhase> {
    match name {
        "fc" => Ok(MetricPhase::Fc),
        "wp" => Ok(MetricPhase::Wp),
        other => Err(PyValueError::new_err(format!("unknown phase {other:?}, expected fc or wp"))),
    }
}

fn requirement(text: &str, id: &str, developer_friendly: bool) -> PyResult<Requirement> {
    let variant = if developer_friendly {
        Variant::DeveloperFriendly
    } else {
        Variant::Original
    };
    Requirement::new(id, text, variant, "").map_err(config_err)
}

/// Search parameters. Mirrors the `evolution` section of a config file.
#[pyclass(name = "EvolutionConfig", module = "evoverif", get_all, set_all)]
struct PyEvolutionConfig {
    p_init: u32,
    n_elite: u32,
    mutate_rate: f64,
    max_gen: u32,
    hard_call_cap: Option<u64>,
    seed: u64,
    temperature: f64,
    eager_stop: bool,
    llm_parallelism: usize,
    verifier_parallelism: usize,
}

impl PyEvolutionConfig {
    fn inner(&self) -> evoverif_core::EvolutionConfig {
        evoverif_core::EvolutionConfig {
            p_init: self.p_init,
            n_elite: self.n_elite,
            mutate_rate: self.mutate_rate,
            max_gen: self.max_gen,
            hard_call_cap: self.hard_call_cap,
            seed: self.seed,
            temperature: self.temperature,
            eager_stop: self.eager_stop,
            llm_parallelism: self.llm_parallelism,
            verifier_parallelism: self.verifier_parallelism,
        }
    }

    fn wrap(c: evoverif_core::EvolutionConfig) -> Self {
        Self {
            p_init: c.p_init,
            n_elite: c.n_elite,
            mutate_rate: c.mutate_rate,
            max_gen: c.max_gen,
            hard_call_cap: c.hard_call_cap,
            seed: c.seed,
            temperature: c.temperature,
            eager_stop: c.eager_stop,
            llm_parallelism: c.llm_parallelism,
            verifier_parallelism: c.verifier_parallelism,
        }
    }
}

#[pymethods]
impl PyEvolutionConfig {
    /// Keyword arguments override the defaults.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(py: Python<'_>, kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut value = serde_json::to_value(evoverif_core::EvolutionConfig::default())
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        if let Some(kwargs) = kwargs {
            let text: String = py.import("json")?.call_method1("dumps", (kwargs,))?.extract()?;
            let overrides: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
            value.as_object_mut().expect("config is an object").extend(overrides);
        }
        let config: evoverif_core::EvolutionConfig =
            serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
        config.validate().map_err(config_err)?;
        Ok(Self::wrap(config))
    }

    fn population(&self) -> PyResult<u32> {
        self.inner().population().map_err(config_err)
    }

    fn call_cap(&self) -> PyResult<u64> {
        self.inner().call_cap().map_err(config_err)
    }

    fn expected_calls(&self) -> PyResult<f64> {
        baselines::expected_calls(&self.inner()).map_err(config_err)
    }

    fn llmver_budget(&self) -> PyResult<u64> {
        baselines::llmver_budget(&self.inner()).map_err(config_err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner())
    }

    fn __repr__(&self) -> String {
        format!(
            "EvolutionConfig(p_init={}, n_elite={}, mutate_rate={}, max_gen={}, seed={})",
            self.p_init, self.n_elite, self.mutate_rate, self.max_gen, self.seed
        )
    }
}

/// Provider, verifier, cache and prompts built from one JSON config.
#[pyclass(name = "Session", module = "evoverif")]
struct PySession {
    config: AppConfig,
    provider: Box<dyn Provider>,
    verifier: Box<dyn Verifier>,
    cache: OutcomeCache,
    prompts: PromptSet,
}

impl PySession {
    fn ctx(&self) -> SearchContext<'_> {
        SearchContext {
            provider: self.provider.as_ref(),
            verifier: self.verifier.as_ref(),
            cache: &self.cache,
            prompts: &self.prompts,
        }
    }
}

#[pymethods]
impl PySession {
    /// `config` is the text of a config file; relative paths resolve
    /// against `base_dir`.
    #[new]
    #[pyo3(signature = (config = "{}", base_dir = "."))]
    fn new(config: &str, base_dir: &str) -> PyResult<Self> {
        let config = AppConfig::parse(config, &PathBuf::from(base_dir)).map_err(config_err)?;
        let provider = config.build_provider().map_err(config_err)?;
        let verifier = config
            .build_verifier()
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let cache = config.build_cache().map_err(config_err)?;
        let prompts = config.build_prompts().map_err(config_err)?;
        Ok(Self {
            config,
            provider,
            verifier,
            cache,
            prompts,
        })
    }

    #[getter]
    fn evolution(&self) -> PyEvolutionConfig {
        PyEvolutionConfig::wrap(self.config.evolution.clone())
    }

    /// Runs one approach on one requirement. Returns the result with its
    /// transcript under `"transcript"`.
    #[pyo3(signature = (requirement_text, approach = "autoice", id = "requirement", seed = None, developer_friendly = false))]
    fn synthesize<'py>(
        &self,
        py: Python<'py>,
        requirement_text: &str,
        approach: &str,
        id: &str,
        seed: Option<u64>,
        developer_friendly: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let approach: Approach = parse(approach)?;
        let req = requirement(requirement_text, id, developer_friendly)?;
        let mut evolution = self.config.evolution.clone();
        let mut baseline = self.config.baseline().map_err(config_err)?;
        if let Some(seed) = seed {
            evolution.seed = seed;
            baseline.seed = seed;
        }
        let result = py
            .detach(|| match approach {
                Approach::Autoice => evolve::run(self.ctx(), &req, &evolution),
                Approach::ZeroShot => zero_shot(self.ctx(), &req, &baseline),
                Approach::LlmVerifier => llm_verifier(self.ctx(), &req, &baseline),
            })
            .map_err(run_err)?;
        let out = to_py(py, &result)?;
        out.set_item("transcript", to_py(py, &result.transcript.events)?)?;
        Ok(out)
    }

    /// Two-phase verification of one C source.
    fn verify<'py>(&self, py: Python<'py>, code: &str) -> PyResult<Bound<'py, PyAny>> {
        let outcome = py
            .detach(|| verifier::evaluate(self.verifier.as_ref(), code, &self.cache))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &outcome)
    }

    /// Multi-trial sweep over a JSON-lines dataset. Returns the records as
    /// JSON lines, ready for the metric functions.
    #[pyo3(signature = (dataset_jsonl, approaches = vec!["autoice".to_string(), "zs".to_string(), "llmver".to_string()], trials = 5, seed = 0, workers = 1))]
    fn bench(
        &self,
        py: Python<'_>,
        dataset_jsonl: &str,
        approaches: Vec<String>,
        trials: u32,
        seed: u64,
        workers: usize,
    ) -> PyResult<String> {
        let approaches = approaches
            .iter()
            .map(|a| parse::<Approach>(a))
            .collect::<PyResult<Vec<_>>>()?;
        let data = harness::parse_dataset(dataset_jsonl).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let sweep = SweepConfig {
            evolution: self.config.evolution.clone(),
            baseline: self.config.baseline().map_err(config_err)?,
            workers,
            record_log: None,
            transcript_dir: None,
        };
        let mut m = ResultMatrix::new(data.iter().map(|r| r.id.clone()).collect(), trials);
        for approach in approaches {
            let part = py
                .detach(|| harness::run_trials(self.ctx(), &data, approach, trials, seed, &sweep))
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            m.merge(part);
        }
        Ok(m.to_jsonl())
    }
}

/// Smallest population of at least `p_init` whose offspring count is even.
#[pyfunction]
fn population_size(p_init: u32, n_elite: u32) -> PyResult<u32> {
    evoverif_core::population_size(p_init, n_elite).map_err(config_err)
}

/// Code from a model reply. Raises `ValueError` when nothing usable is found.
#[pyfunction]
fn extract_code(response: &str) -> PyResult<String> {
    providers::extract_code(response).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `(proved, total)` from WP output; `(0, 0)` when there is no summary.
#[pyfunction]
fn parse_goal_summary(raw_output: &str) -> (u64, u64) {
    verifier::parse_goal_summary(raw_output)
}

#[pyfunction]
fn mix_seed(base_seed: u64, instance_id: &str, trial: u32) -> u64 {
    harness::mix_seed(base_seed, instance_id, trial)
}

#[pyfunction]
fn render_zero_shot(requirement_text: &str) -> PyResult<String> {
    Ok(PromptSet::default().render_zero_shot(&requirement(requirement_text, "requirement", false)?))
}

#[pyfunction]
#[pyo3(signature = (requirement_text, strategy = 0))]
fn render_init_code(requirement_text: &str, strategy: usize) -> PyResult<String> {
    let prompts = PromptSet::default();
    let strategy = prompts.strategy_for(strategy).map_err(config_err)?;
    Ok(prompts.render_init_code(&requirement(requirement_text, "requirement", false)?, strategy))
}

#[pyfunction]
fn render_refinement(requirement_text: &str, code: &str, errors: &str) -> PyResult<String> {
    Ok(PromptSet::default().render_refinement(&requirement(requirement_text, "requirement", false)?, code, errors))
}

#[pyfunction]
#[pyo3(signature = (records_jsonl, approach, trial = 0, phase = "wp"))]
fn pass_at_1(records_jsonl: &str, approach: &str, trial: u32, phase: &str) -> PyResult<f64> {
    Ok(harness::pass_at_1(&matrix(records_jsonl, None)?, parse(approach)?, trial, self::phase(phase)?))
}

#[pyfunction]
#[pyo3(signature = (records_jsonl, approach, phase = "wp", n_trials = None))]
fn avg_pass_at_1(records_jsonl: &str, approach: &str, phase: &str, n_trials: Option<u32>) -> PyResult<f64> {
    Ok(harness::avg_pass_at_1(&matrix(records_jsonl, n_trials)?, parse(approach)?, self::phase(phase)?))
}

#[pyfunction]
#[pyo3(signature = (records_jsonl, approach, phase = "wp", n_trials = None))]
fn pass_at_5(records_jsonl: &str, approach: &str, phase: &str, n_trials: Option<u32>) -> PyResult<f64> {
    Ok(harness::pass_at_5(&matrix(records_jsonl, n_trials)?, parse(approach)?, self::phase(phase)?))
}

/// One summary row per (approach, dataset).
#[pyfunction]
#[pyo3(signature = (records_jsonl, n_trials = None))]
fn summarize<'py>(py: Python<'py>, records_jsonl: &str, n_trials: Option<u32>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &harness::summarize(&matrix(records_jsonl, n_trials)?))
}

/// Report text in `json`, `csv` or `markdown`.
#[pyfunction]
#[pyo3(signature = (records_jsonl, format = "markdown"))]
fn render_report(records_jsonl: &str, format: &str) -> PyResult<String> {
    let format: ReportFormat = format.parse().map_err(|e: ConfigError| config_err(e))?;
    Ok(harness::render_report(&matrix(records_jsonl, None)?, format))
}

#[pymodule]
fn evoverif(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEvolutionConfig>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(population_size, m)?)?;
    m.add_function(wrap_pyfunction!(extract_code, m)?)?;
    m.add_function(wrap_pyfunction!(parse_goal_summary, m)?)?;
    m.add_function(wrap_pyfunction!(mix_seed, m)?)?;
    m.add_function(wrap_pyfunction!(render_zero_shot, m)?)?;
    m.add_function(wrap_pyfunction!(render_init_code, m)?)?;
    m.add_function(wrap_pyfunction!(render_refinement, m)?)?;
    m.add_function(wrap_pyfunction!(pass_at_1, m)?)?;
    m.add_function(wrap_pyfunction!(avg_pass_at_1, m)?)?;
    m.add_function(wrap_pyfunction!(pass_at_5, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
