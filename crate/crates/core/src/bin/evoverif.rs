use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evoverif_core::baselines::{llm_verifier, zero_shot};
use evoverif_core::config::AppConfig;
use evoverif_core::evolve::{run, RunError, SearchContext};
use evoverif_core::harness::{
    load_dataset, render_report, run_trials, ReportFormat, ResultMatrix, SweepConfig, SweepError,
};
use evoverif_core::verifier::{evaluate, EnvironmentError};
use evoverif_core::{Approach, ConfigError, Requirement, Variant};

const EXIT_NOT_SYNTHESIZED: u8 = 2;
const EXIT_ENVIRONMENT: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "evoverif", version, about = "Synthesize and verify ACSL-annotated C programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one approach on one requirement.
    Synth {
        /// JSON object `{id, text, variant, dataset}` or a plain-text requirement.
        #[arg(long)]
        requirement: PathBuf,
        /// autoice, zs or llmver
        #[arg(long, default_value = "autoice")]
        approach: Approach,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-trial sweep over a JSON-lines dataset.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated list of approaches.
        #[arg(long, value_delimiter = ',', default_value = "autoice,zs,llmver")]
        approaches: Vec<Approach>,
        #[arg(long, default_value_t = 5)]
        trials: u32,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verifier once on a C file and print the outcome as JSON.
    Verify {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render metrics from a bench output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Environment(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<EnvironmentError> for Failure {
    fn from(e: EnvironmentError) -> Self {
        Self::Environment(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Self::Config(c.0),
            RunError::State(s) => Self::Config(s.to_string()),
            other => Self::Environment(other.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(c) => Self::Config(c.0),
            other => Self::Environment(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Environment(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<AppConfig, Failure> {
    Ok(match path {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    })
}

fn read_requirement(path: &Path) -> Result<Requirement, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let req: Requirement = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        req.validate()?;
        return Ok(req);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "requirement".into());
    Ok(Requirement::new(id, text.trim(), Variant::Original, "")?)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn synth(
    requirement: &Path,
    approach: Approach,
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<u8, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.evolution.seed = seed;
    }
    let req = read_requirement(requirement)?;
    let provider = cfg.build_provider()?;
    let verifier = cfg.build_verifier()?;
    let cache = cfg.build_cache()?;
    let prompts = cfg.build_prompts()?;
    let ctx = SearchContext {
        provider: provider.as_ref(),
        verifier: verifier.as_ref(),
        cache: &cache,
        prompts: &prompts,
    };
    let mut baseline = cfg.baseline()?;
    baseline.seed = cfg.evolution.seed;
    let result = match approach {
        Approach::Autoice => run(ctx, &req, &cfg.evolution)?,
        Approach::ZeroShot => zero_shot(ctx, &req, &baseline)?,
        Approach::LlmVerifier => llm_verifier(ctx, &req, &baseline)?,
    };
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    write(
        &out.join("result.json"),
        &(serde_json::to_string_pretty(&result).expect("result serializes") + "\n"),
    )?;
    result
        .transcript
        .write_jsonl(&out.join("transcript.jsonl"))
        .map_err(|e| io_failure(out, e))?;
    if let Some(code) = &result.code {
        write(&out.join("solution.c"), code)?;
        println!("solved with {} LLM call(s)", result.llm_calls);
        Ok(0)
    } else {
        println!("not synthesized after {} LLM call(s)", result.llm_calls);
        Ok(EXIT_NOT_SYNTHESIZED)
    }
}

#[allow(clippy::too_many_arguments)]
fn bench(
    dataset: &Path,
    approaches: &[Approach],
    trials: u32,
    config: Option<&Path>,
    seed: u64,
    workers: Option<usize>,
    out: &Path,
) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let requirements = load_dataset(dataset).map_err(|e| Failure::Config(e.to_string()))?;
    let provider = cfg.build_provider()?;
    let verifier = cfg.build_verifier()?;
    let cache = cfg.build_cache()?;
    let prompts = cfg.build_prompts()?;
    let ctx = SearchContext {
        provider: provider.as_ref(),
        verifier: verifier.as_ref(),
        cache: &cache,
        prompts: &prompts,
    };
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let sweep = SweepConfig {
        evolution: cfg.evolution.clone(),
        baseline: cfg.baseline()?,
        workers: workers.or(cfg.workers).unwrap_or(1),
        record_log: Some(out.join("records.jsonl")),
        transcript_dir: Some(out.join("transcripts")),
    };
    let mut matrix = ResultMatrix::new(requirements.iter().map(|r| r.id.clone()).collect(), trials);
    for &approach in approaches {
        matrix.merge(run_trials(ctx, &requirements, approach, trials, seed, &sweep)?);
    }
    for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
        write(
            &out.join(format!("report.{}", format.extension())),
            &render_report(&matrix, format),
        )?;
    }
    print!("{}", render_report(&matrix, ReportFormat::Markdown));
    Ok(0)
}

fn verify(file: &Path, config: Option<&Path>) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let code = std::fs::read_to_string(file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    let verifier = cfg.build_verifier()?;
    let cache = cfg.build_cache()?;
    let outcome = evaluate(verifier.as_ref(), &code, &cache)?;
    println!("{}", serde_json::to_string_pretty(&outcome).expect("outcome serializes"));
    Ok(if outcome.sem_pass { 0 } else { EXIT_NOT_SYNTHESIZED })
}

fn report(input: &Path, format: ReportFormat, out: Option<&Path>) -> Result<u8, Failure> {
    let log = if input.is_dir() { input.join("records.jsonl") } else { input.to_path_buf() };
    let text = std::fs::read_to_string(&log).map_err(|e| Failure::Config(format!("{}: {e}", log.display())))?;
    let matrix = ResultMatrix::from_jsonl(&text, None).map_err(|e| Failure::Config(format!("{}: {e}", log.display())))?;
    let rendered = render_report(&matrix, format);
    match out {
        Some(path) => write(path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth {
            requirement,
            approach,
            config,
            seed,
            out,
        } => synth(requirement, *approach, config.as_deref(), *seed, out),
        Command::Bench {
            dataset,
            approaches,
            trials,
            config,
            seed,
            workers,
            out,
        } => bench(dataset, approaches, *trials, config.as_deref(), *seed, *workers, out),
        Command::Verify { file, config } => verify(file, config.as_deref()),
        Command::Report { input, format, out } => report(input, *format, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Environment(msg)) => {
            eprintln!("environment error: {msg}");
            ExitCode::from(EXIT_ENVIRONMENT)
        }
    }
}
