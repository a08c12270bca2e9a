//! The two comparison approaches: a single zero-shot call, and the
//! generate/verify/refine loop with one shared iteration counter.

use serde::{Deserialize, Serialize};

use crate::evolve::{assess, failed, fitness_or_zero, generate, RunError, SearchContext, SynthesisResult};
use crate::providers::{BudgetLedger, ChatRequest, PhaseTag};
use crate::transcript::{Event, EventKind, Transcript};
use crate::types::{Approach, ConfigError, EvolutionConfig, Lineage, Origin, Requirement};
use crate::verifier::{VerifierReport, VerifyPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Refinement iterations after the two initialization calls.
    pub max_iter: u64,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            max_iter: 38,
            seed: 0,
            temperature: 1.0,
        }
    }
}

impl BaselineConfig {
    /// Refinement budget matched to the engine's expected call count.
    pub fn matched_to(evolution: &EvolutionConfig) -> Result<Self, ConfigError> {
        Ok(Self {
            max_iter: llmver_budget(evolution)?,
            seed: evolution.seed,
            temperature: evolution.temperature,
        })
    }
}

/// Expected LLM calls of a search that never succeeds:
/// `2·p_init + max_gen·(P − n_elite)·(1 + mutate_rate)`.
pub fn expected_calls(config: &EvolutionConfig) -> Result<f64, ConfigError> {
    let offspring = f64::from(config.population()? - config.n_elite);
    Ok(2.0 * f64::from(config.p_init)
        + f64::from(config.max_gen) * offspring * (1.0 + config.mutate_rate))
}

/// Refinement iterations for the loop baseline: the rounded expectation minus
/// its two initialization calls.
pub fn llmver_budget(config: &EvolutionConfig) -> Result<u64, ConfigError> {
    let expected = expected_calls(config)?;
    if expected < 2.0 {
        return Err(ConfigError::new(format!(
            "expected call count {expected} leaves no room for initialization"
        )));
    }
    Ok(expected.round() as u64 - 2)
}

fn request(phase: PhaseTag, seq: u64, prompt: String, ctx: SearchContext<'_>, temperature: f64) -> ChatRequest {
    let mut r = ChatRequest::new(phase, seq, prompt);
    r.model = ctx.provider.model().to_string();
    r.temperature = temperature;
    r
}

/// One call, one evaluation. A budget of zero fails before calling.
pub fn run_zero_shot(
    ctx: SearchContext<'_>,
    req: &Requirement,
    config: &BaselineConfig,
    ledger: &BudgetLedger,
) -> Result<SynthesisResult, RunError> {
    req.validate()?;
    let reservation = ledger.reserve(PhaseTag::ZeroShot)?;
    let r = request(PhaseTag::ZeroShot, 0, ctx.prompts.render_zero_shot(req), ctx, config.temperature);
    let lineage = Lineage::new(Origin::ZeroShot, 0);
    let ind = match generate(ctx.provider, &r, reservation) {
        Ok(code) => assess(ctx, code, lineage)?,
        Err(reason) => failed(reason, lineage),
    };
    let mut transcript = Transcript::default();
    let mut event = Event::new(EventKind::ZeroShot, 0)
        .slot(0)
        .lineage(&ind.lineage)
        .fitness(fitness_or_zero(&ind));
    if ind.code.is_empty() {
        if let Some(e) = &ind.evaluation {
            event = event.detail(e.syn_report.clone());
        }
    }
    transcript.push(Approach::ZeroShot, ledger.used(), event);
    let kind = if fitness_or_zero(&ind) == 2 {
        EventKind::Solved
    } else {
        EventKind::NotSynthesized
    };
    transcript.push(
        Approach::ZeroShot,
        ledger.used(),
        Event::new(kind, 0).fitness(fitness_or_zero(&ind)),
    );
    Ok(SynthesisResult::finish(Approach::ZeroShot, Some(ind), 0, ledger, transcript))
}

/// Zero-shot run with its own single-call ledger.
pub fn zero_shot(
    ctx: SearchContext<'_>,
    req: &Requirement,
    config: &BaselineConfig,
) -> Result<SynthesisResult, RunError> {
    run_zero_shot(ctx, req, config, &BudgetLedger::new(1))
}

struct Loop<'a> {
    ctx: SearchContext<'a>,
    req: &'a Requirement,
    config: &'a BaselineConfig,
    ledger: &'a BudgetLedger,
    transcript: Transcript,
    code: String,
    refinements: u32,
}

impl Loop<'_> {
    fn log(&mut self, event: Event) {
        self.transcript
            .push(Approach::LlmVerifier, self.ledger.used(), event);
    }

    fn check(&mut self, phase: VerifyPhase) -> Result<VerifierReport, RunError> {
        let report = self.ctx.cache.check(self.ctx.verifier, phase, &self.code)?;
        let kind = match phase {
            VerifyPhase::Base => EventKind::BaseCheck,
            VerifyPhase::Wp => EventKind::WpCheck,
        };
        let mut event = Event::new(kind, self.refinements).detail(if report.pass { "pass" } else { "fail" });
        if report.pass {
            event = event.fitness(match phase {
                VerifyPhase::Base => 1,
                VerifyPhase::Wp => 2,
            });
        }
        self.log(event);
        Ok(report)
    }

    /// One refinement call. Returns false when the budget is gone. A reply
    /// without usable code leaves the current candidate in place.
    fn refine(&mut self, diagnostics: &str) -> bool {
        let Ok(reservation) = self.ledger.reserve(PhaseTag::Refinement) else {
            self.log(Event::new(EventKind::BudgetExhausted, self.refinements));
            return false;
        };
        let prompt = self.ctx.prompts.render_refinement(self.req, &self.code, diagnostics);
        let r = request(
            PhaseTag::Refinement,
            u64::from(self.refinements),
            prompt,
            self.ctx,
            self.config.temperature,
        );
        self.refinements += 1;
        let mut event = Event::new(EventKind::Refinement, self.refinements)
            .lineage(&Lineage::new(Origin::Refinement, self.refinements));
        match generate(self.ctx.provider, &r, reservation) {
            Ok(code) => self.code = code,
            Err(reason) => event = event.detail(format!("kept previous candidate: {reason}")),
        }
        self.log(event);
        true
    }
}

/// Generate, then verify and refine: first against the base check, then
/// against WP, with one iteration counter shared by both loops. The final
/// candidate is evaluated once more at the end, so with `max_iter = 0` the
/// initial output decides the outcome.
pub fn run_llm_verifier(
    ctx: SearchContext<'_>,
    req: &Requirement,
    config: &BaselineConfig,
    ledger: &BudgetLedger,
) -> Result<SynthesisResult, RunError> {
    req.validate()?;
    let strategy = ctx.prompts.strategy_for(0)?.clone();
    let mut lp = Loop {
        ctx,
        req,
        config,
        ledger,
        transcript: Transcript::default(),
        code: String::new(),
        refinements: 0,
    };

    let first = ledger.reserve(PhaseTag::InitCode)?;
    let second = ledger.reserve(PhaseTag::InitSpec)?;
    let r = request(
        PhaseTag::InitCode,
        0,
        ctx.prompts.render_init_code(req, &strategy),
        ctx,
        config.temperature,
    );
    let init = generate(ctx.provider, &r, first).and_then(|c_code| {
        let r = request(
            PhaseTag::InitSpec,
            0,
            ctx.prompts.render_init_spec(req, &c_code, &strategy),
            ctx,
            config.temperature,
        );
        generate(ctx.provider, &r, second)
    });
    let mut event = Event::new(EventKind::Initialized, 0)
        .lineage(&Lineage::new(Origin::Init, 0).with_strategy(strategy.name.as_str()));
    match init {
        Ok(code) => lp.code = code,
        Err(reason) => event = event.detail(reason),
    }
    lp.log(event);

    let mut n_iter = config.max_iter;
    let mut budget_left = true;
    while n_iter > 0 {
        let report = lp.check(VerifyPhase::Base)?;
        if report.pass {
            break;
        }
        budget_left = lp.refine(&report.raw_output);
        if !budget_left {
            break;
        }
        n_iter -= 1;
    }
    while n_iter > 0 && budget_left {
        let report = lp.check(VerifyPhase::Wp)?;
        if report.pass {
            break;
        }
        budget_left = lp.refine(&report.raw_output);
        if !budget_left {
            break;
        }
        n_iter -= 1;
    }

    let lineage = if lp.refinements == 0 {
        Lineage::new(Origin::Init, 0).with_strategy(strategy.name.as_str())
    } else {
        Lineage::new(Origin::Refinement, lp.refinements)
    };
    let best = if lp.code.is_empty() {
        failed("no candidate code was produced".into(), lineage)
    } else {
        assess(ctx, lp.code.clone(), lineage)?
    };
    let kind = if fitness_or_zero(&best) == 2 {
        EventKind::Solved
    } else {
        EventKind::NotSynthesized
    };
    lp.log(Event::new(kind, lp.refinements).fitness(fitness_or_zero(&best)));
    Ok(SynthesisResult::finish(
        Approach::LlmVerifier,
        Some(best),
        lp.refinements,
        ledger,
        lp.transcript,
    ))
}

/// Loop baseline with its own ledger capped at `2 + max_iter`.
pub fn llm_verifier(
    ctx: SearchContext<'_>,
    req: &Requirement,
    config: &BaselineConfig,
) -> Result<SynthesisResult, RunError> {
    run_llm_verifier(ctx, req, config, &BudgetLedger::new(2 + config.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_formula() {
        let d = EvolutionConfig::default();
        assert_eq!(expected_calls(&d).unwrap(), 40.0);
        assert_eq!(llmver_budget(&d).unwrap(), 38);
        let r0 = EvolutionConfig {
            mutate_rate: 0.0,
            ..Default::default()
        };
        assert_eq!(expected_calls(&r0).unwrap(), 30.0);
        assert_eq!(llmver_budget(&r0).unwrap(), 28);
        let g0 = EvolutionConfig {
            max_gen: 0,
            ..Default::default()
        };
        assert_eq!(expected_calls(&g0).unwrap(), 10.0);
        assert_eq!(llmver_budget(&g0).unwrap(), 8);
    }

    #[test]
    fn fractional_expectation_rounds() {
        // 10 + 5·4·1.33 = 36.6
        let c = EvolutionConfig {
            mutate_rate: 0.33,
            max_gen: 5,
            ..Default::default()
        };
        let e = expected_calls(&c).unwrap();
        assert!((e - 36.6).abs() < 1e-9, "{e}");
        assert_eq!(llmver_budget(&c).unwrap(), 35);
    }
}
