//! Evolutionary synthesis of ACSL-annotated C programs with an LLM as the
//! variation operator and Frama-C/WP as the fitness oracle.

pub mod baselines;
pub mod config;
pub mod evolve;
pub mod harness;
mod parallel;
pub mod prompts;
pub mod providers;
pub mod transcript;
pub mod types;
pub mod verifier;

pub use evolve::{RunError, SearchContext, Status, SynthesisResult};
pub use types::*;
