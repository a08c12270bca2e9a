//! The evolutionary search: two-phase initialization, elitist selection,
//! LLM crossover and mutation, and the generation loop.
//!
//! Randomness comes from one `ChaCha8Rng` seeded with `config.seed`. Draws
//! happen on the control thread in a fixed order (elite ties, then per pair:
//! parent draws followed by two mutation coin flips), so a run replays
//! exactly no matter how many worker threads issue the LLM calls.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::par_map;
use crate::prompts::PromptSet;
use crate::providers::{
    complete_reserved, extract_code, BudgetExhausted, BudgetLedger, ChatRequest, LedgerSnapshot,
    PhaseTag, Provider, Reservation,
};
use crate::transcript::{Event, EventKind, Transcript};
use crate::types::{
    Approach, ConfigError, Evaluation, EvolutionConfig, Individual, Lineage, Origin, Requirement,
    StateError,
};
use crate::verifier::{evaluate, EnvironmentError, OutcomeCache, Verifier};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    BudgetExhausted(#[from] BudgetExhausted),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Everything a run talks to.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub provider: &'a dyn Provider,
    pub verifier: &'a dyn Verifier,
    pub cache: &'a OutcomeCache,
    pub prompts: &'a PromptSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: u32,
}

impl Population {
    pub fn max_fitness(&self) -> Option<u8> {
        self.members.iter().map(fitness_or_zero).max()
    }

    pub fn first_solution(&self) -> Option<&Individual> {
        self.members.iter().find(|m| fitness_or_zero(m) == 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    NotSynthesized,
}

/// Outcome of one synthesis run, shared by the engine and both baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub approach: Approach,
    pub status: Status,
    /// Verified source; present exactly when `status` is `Solved`.
    pub code: Option<String>,
    /// Best candidate seen, also when nothing verified. Its `syn_pass` is what
    /// the harness records as the FC outcome.
    pub best: Option<Individual>,
    pub generations_run: u32,
    pub llm_calls: u64,
    pub ledger: LedgerSnapshot,
    #[serde(skip)]
    pub transcript: Transcript,
}

impl SynthesisResult {
    pub fn is_solved(&self) -> bool {
        self.status == Status::Solved
    }

    pub(crate) fn finish(
        approach: Approach,
        best: Option<Individual>,
        generations_run: u32,
        ledger: &BudgetLedger,
        transcript: Transcript,
    ) -> Self {
        let solved = best.as_ref().is_some_and(|b| fitness_or_zero(b) == 2);
        Self {
            approach,
            status: if solved { Status::Solved } else { Status::NotSynthesized },
            code: best.as_ref().filter(|_| solved).map(|b| b.code.clone()),
            best,
            generations_run,
            llm_calls: ledger.used(),
            ledger: ledger.snapshot(),
            transcript,
        }
    }
}

pub(crate) fn fitness_or_zero(ind: &Individual) -> u8 {
    ind.fitness().unwrap_or(0)
}

/// Returns `n` members of highest fitness. Whole tiers above the cut are
/// taken; inside the tier straddling the cut, members are drawn uniformly
/// without replacement. Output keeps population order.
pub fn select_elites(pop: &[Individual], n: usize, rng: &mut ChaCha8Rng) -> Vec<Individual> {
    let n = n.min(pop.len());
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(fitness_or_zero(&pop[i])));
    let cut = fitness_or_zero(&pop[order[n - 1]]);
    let mut chosen: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| fitness_or_zero(&pop[i]) > cut)
        .collect();
    let mut ties: Vec<usize> = (0..pop.len())
        .filter(|&i| fitness_or_zero(&pop[i]) == cut)
        .collect();
    let need = n - chosen.len();
    if ties.len() > need {
        for k in 0..need {
            let j = rng.random_range(k..ties.len());
            ties.swap(k, j);
        }
    }
    chosen.extend_from_slice(&ties[..need]);
    chosen.sort_unstable();
    chosen.into_iter().map(|i| pop[i].clone()).collect()
}

/// Indices of the two parents. Both come from the top fitness tier when it
/// has at least two members. A lone top member is paired with a uniform pick
/// from the next non-empty tier. A one-member population yields `(0, 0)`.
pub fn select_parents(
    pop: &[Individual],
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize), StateError> {
    if pop.is_empty() {
        return Err(StateError::EmptyPopulation);
    }
    if pop.len() == 1 {
        return Ok((0, 0));
    }
    let mut tiers: BTreeMap<std::cmp::Reverse<u8>, Vec<usize>> = BTreeMap::new();
    for (i, m) in pop.iter().enumerate() {
        tiers
            .entry(std::cmp::Reverse(fitness_or_zero(m)))
            .or_default()
            .push(i);
    }
    let mut tiers = tiers.into_values();
    let top = tiers.next().expect("non-empty population");
    if top.len() >= 2 {
        let i = rng.random_range(0..top.len());
        let mut j = rng.random_range(0..top.len() - 1);
        if j >= i {
            j += 1;
        }
        return Ok((top[i], top[j]));
    }
    let next = tiers.next().expect("population of two or more has a second tier");
    let j = rng.random_range(0..next.len());
    Ok((top[0], next[j]))
}

/// One LLM job: a rendered prompt plus its pre-reserved ledger slot.
struct Job<'l> {
    request: ChatRequest,
    reservation: Reservation<'l>,
    lineage: Lineage,
}

/// Sends the request, extracts the code block and evaluates it. Provider and
/// extraction failures become a failing individual with empty code.
fn produce(ctx: SearchContext<'_>, job: Job<'_>) -> Result<Individual, EnvironmentError> {
    match generate(ctx.provider, &job.request, job.reservation) {
        Ok(code) => assess(ctx, code, job.lineage),
        Err(reason) => Ok(failed(reason, job.lineage)),
    }
}

pub(crate) fn generate(
    provider: &dyn Provider,
    request: &ChatRequest,
    reservation: Reservation<'_>,
) -> Result<String, String> {
    let response = complete_reserved(provider, request, reservation).map_err(|e| e.to_string())?;
    extract_code(&response.text).map_err(|e| e.to_string())
}

pub(crate) fn assess(
    ctx: SearchContext<'_>,
    code: String,
    lineage: Lineage,
) -> Result<Individual, EnvironmentError> {
    let outcome = evaluate(ctx.verifier, &code, ctx.cache)?;
    Ok(Individual::evaluated(code, outcome.to_evaluation(), lineage))
}

pub(crate) fn failed(reason: String, lineage: Lineage) -> Individual {
    Individual::evaluated(String::new(), Evaluation::synthetic_failure(reason), lineage)
}

/// Failure reason for the transcript, if the individual never got code.
fn failure_detail(ind: &Individual) -> Option<String> {
    if !ind.code.is_empty() {
        return None;
    }
    ind.evaluation.as_ref().map(|e| e.syn_report.clone())
}

enum StepError {
    Budget(BudgetExhausted),
    Environment(EnvironmentError),
}

impl From<EnvironmentError> for StepError {
    fn from(e: EnvironmentError) -> Self {
        Self::Environment(e)
    }
}

/// Per-run state of the search. The ledger lives outside so reservations can
/// borrow it while the search mutates its own transcript and rng.
pub struct Search<'a> {
    ctx: SearchContext<'a>,
    req: &'a Requirement,
    config: EvolutionConfig,
    population_size: usize,
    ledger: &'a BudgetLedger,
    rng: ChaCha8Rng,
    transcript: Transcript,
    seqs: BTreeMap<PhaseTag, u64>,
}

impl<'a> Search<'a> {
    pub fn new(
        ctx: SearchContext<'a>,
        req: &'a Requirement,
        config: EvolutionConfig,
        ledger: &'a BudgetLedger,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        req.validate()?;
        Ok(Self {
            ctx,
            req,
            population_size: config.population()? as usize,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            ledger,
            transcript: Transcript::default(),
            seqs: BTreeMap::new(),
        })
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn next_seq(&mut self, phase: PhaseTag) -> u64 {
        let slot = self.seqs.entry(phase).or_insert(0);
        let seq = *slot;
        *slot += 1;
        seq
    }

    fn request(&mut self, phase: PhaseTag, prompt: String) -> ChatRequest {
        let seq = self.next_seq(phase);
        let mut request = ChatRequest::new(phase, seq, prompt);
        request.model = self.ctx.provider.model().to_string();
        request.temperature = self.config.temperature;
        request
    }

    fn log(&mut self, event: Event) {
        self.transcript
            .push(Approach::Autoice, self.ledger.used(), event);
    }

    fn log_individual(&mut self, kind: EventKind, generation: u32, slot: usize, ind: &Individual) {
        let mut event = Event::new(kind, generation)
            .slot(slot)
            .lineage(&ind.lineage)
            .fitness(fitness_or_zero(ind));
        if let Some(detail) = failure_detail(ind) {
            event = event.detail(detail);
        }
        self.log(event);
    }

    fn workers(&self) -> usize {
        self.config.llm_parallelism
    }

    /// Builds up to `p_init` individuals, two calls each. Stops early (with an
    /// `init_truncated` event) once the budget cannot cover both calls of the
    /// next individual.
    pub fn initialize_population(&mut self) -> Result<Population, RunError> {
        let p_init = self.config.p_init as usize;
        let mut members = Vec::with_capacity(p_init);
        let mut truncated = false;
        // Eager stopping has to look at each individual before paying for the
        // next one, so it forces a sequential init.
        let batch = if self.config.eager_stop { 1 } else { p_init.max(1) };
        let mut index = 0;
        while index < p_init && !truncated {
            let mut jobs = Vec::new();
            while jobs.len() < batch && index < p_init {
                let Ok(first) = self.ledger.reserve(PhaseTag::InitCode) else {
                    truncated = true;
                    break;
                };
                let Ok(second) = self.ledger.reserve(PhaseTag::InitSpec) else {
                    drop(first);
                    truncated = true;
                    break;
                };
                let strategy = self.ctx.prompts.strategy_for(index)?.clone();
                let code_seq = self.next_seq(PhaseTag::InitCode);
                let spec_seq = self.next_seq(PhaseTag::InitSpec);
                jobs.push((strategy, first, second, code_seq, spec_seq));
                index += 1;
            }
            let ctx = self.ctx;
            let req = self.req;
            let model = ctx.provider.model().to_string();
            let temperature = self.config.temperature;
            let results = par_map(jobs, self.workers(), |(strategy, first, second, cs, ss)| {
                let lineage = Lineage::new(Origin::Init, 0).with_strategy(strategy.name.as_str());
                let mut request =
                    ChatRequest::new(PhaseTag::InitCode, cs, ctx.prompts.render_init_code(req, &strategy));
                request.model = model.clone();
                request.temperature = temperature;
                let code = match generate(ctx.provider, &request, first) {
                    Ok(code) => code,
                    Err(reason) => {
                        drop(second);
                        return Ok(failed(reason, lineage));
                    }
                };
                let mut request = ChatRequest::new(
                    PhaseTag::InitSpec,
                    ss,
                    ctx.prompts.render_init_spec(req, &code, &strategy),
                );
                request.model = model.clone();
                request.temperature = temperature;
                match generate(ctx.provider, &request, second) {
                    Ok(code) => assess(ctx, code, lineage),
                    Err(reason) => Ok(failed(reason, lineage)),
                }
            });
            for ind in results {
                let ind = ind?;
                self.log_individual(EventKind::Initialized, 0, members.len(), &ind);
                members.push(ind);
            }
            if self.config.eager_stop && members.iter().any(|m| fitness_or_zero(m) == 2) {
                break;
            }
        }
        if truncated {
            self.log(
                Event::new(EventKind::InitTruncated, 0)
                    .detail(format!("{} of {} individuals initialized", members.len(), p_init)),
            );
        }
        Ok(Population {
            members,
            generation: 0,
        })
    }

    /// Two offspring: `p1` refined with `p2` as donor, then the roles swapped.
    pub fn crossover_pair(
        &mut self,
        p1: &Individual,
        p2: &Individual,
        generation: u32,
    ) -> Result<(Individual, Individual), RunError> {
        match self.crossover_inner(p1, p2, generation) {
            Ok(pair) => Ok(pair),
            Err(StepError::Budget(e)) => Err(e.into()),
            Err(StepError::Environment(e)) => Err(e.into()),
        }
    }

    fn crossover_inner(
        &mut self,
        p1: &Individual,
        p2: &Individual,
        generation: u32,
    ) -> Result<(Individual, Individual), StepError> {
        let first = self.ledger.reserve(PhaseTag::Crossover).map_err(StepError::Budget)?;
        let second = self.ledger.reserve(PhaseTag::Crossover).map_err(StepError::Budget)?;
        let prompts = self.ctx.prompts;
        let r1 = self.request(PhaseTag::Crossover, prompts.render_crossover(self.req, p1, p2));
        let r2 = self.request(PhaseTag::Crossover, prompts.render_crossover(self.req, p2, p1));
        let lineage = Lineage::new(Origin::Crossover, generation);
        let jobs = vec![
            Job {
                request: r1,
                reservation: first,
                lineage: lineage.clone(),
            },
            Job {
                request: r2,
                reservation: second,
                lineage,
            },
        ];
        let ctx = self.ctx;
        let mut out = par_map(jobs, self.workers(), |job| produce(ctx, job)).into_iter();
        let o1 = out.next().expect("two jobs")?;
        let o2 = out.next().expect("two jobs")?;
        Ok((o1, o2))
    }

    /// Coin flip against `mutate_rate`; on success the offspring is replaced by
    /// the mutated version, even if that one fails. Out of budget, the input
    /// comes back unchanged.
    pub fn maybe_mutate(&mut self, o: Individual, generation: u32) -> Result<Individual, RunError> {
        let flip = self.flip();
        let mut out = self.mutate_flipped(vec![(o, flip)], generation, 0)?;
        Ok(out.pop().expect("one offspring"))
    }

    fn flip(&mut self) -> bool {
        let u: f64 = self.rng.random();
        u < self.config.mutate_rate
    }

    /// Mutates the offspring whose flip came up, concurrently. `slot0` is the
    /// population slot of the first offspring, for the transcript.
    fn mutate_flipped(
        &mut self,
        offspring: Vec<(Individual, bool)>,
        generation: u32,
        slot0: usize,
    ) -> Result<Vec<Individual>, RunError> {
        let mut kept: Vec<Option<Individual>> = Vec::with_capacity(offspring.len());
        let mut jobs = Vec::new();
        let mut targets = Vec::new();
        for (k, (o, flip)) in offspring.into_iter().enumerate() {
            if !flip {
                kept.push(Some(o));
                continue;
            }
            match self.ledger.reserve(PhaseTag::Mutation) {
                Ok(reservation) => {
                    let request =
                        self.request(PhaseTag::Mutation, self.ctx.prompts.render_mutation(self.req, &o));
                    jobs.push(Job {
                        request,
                        reservation,
                        lineage: Lineage::new(Origin::Mutation, generation),
                    });
                    targets.push(k);
                    kept.push(None);
                }
                Err(e) => {
                    self.log(
                        Event::new(EventKind::MutationSkipped, generation)
                            .slot(slot0 + k)
                            .lineage(&o.lineage)
                            .fitness(fitness_or_zero(&o))
                            .detail(e.to_string()),
                    );
                    kept.push(Some(o));
                }
            }
        }
        let ctx = self.ctx;
        let results = par_map(jobs, self.workers(), |job| produce(ctx, job));
        for (k, result) in targets.into_iter().zip(results) {
            let ind = result?;
            self.log_individual(EventKind::Mutation, generation, slot0 + k, &ind);
            kept[k] = Some(ind);
        }
        Ok(kept.into_iter().map(|o| o.expect("every slot filled")).collect())
    }

    /// Runs the whole search.
    pub fn run(mut self) -> Result<SynthesisResult, RunError> {
        let mut pop = self.initialize_population()?;
        let truncated = pop.members.len() < self.config.p_init as usize;
        if pop.first_solution().is_some() || truncated || pop.members.is_empty() {
            return Ok(self.conclude(&pop.members, 0));
        }

        for generation in 1..=self.config.max_gen {
            let mut next = select_elites(&pop.members, self.config.n_elite as usize, &mut self.rng);
            for (slot, elite) in next.clone().iter().enumerate() {
                self.log_individual(EventKind::Elite, generation, slot, elite);
            }
            while next.len() < self.population_size {
                let (i, j) = select_parents(&pop.members, &mut self.rng)?;
                self.log(
                    Event::new(EventKind::Parents, generation)
                        .slot(next.len())
                        .detail(format!("{i},{j}")),
                );
                let (p1, p2) = (pop.members[i].clone(), pop.members[j].clone());
                let (o1, o2) = match self.crossover_inner(&p1, &p2, generation) {
                    Ok(pair) => pair,
                    Err(StepError::Environment(e)) => return Err(e.into()),
                    Err(StepError::Budget(e)) => {
                        self.log(Event::new(EventKind::BudgetExhausted, generation).detail(e.to_string()));
                        let mut seen = pop.members.clone();
                        seen.extend(next);
                        return Ok(self.conclude(&seen, generation - 1));
                    }
                };
                let slot = next.len();
                self.log_individual(EventKind::Crossover, generation, slot, &o1);
                self.log_individual(EventKind::Crossover, generation, slot + 1, &o2);
                if self.config.eager_stop {
                    if let Some(hit) = [&o1, &o2].into_iter().find(|o| fitness_or_zero(o) == 2) {
                        let hit = hit.clone();
                        return Ok(self.conclude(&[hit], generation - 1));
                    }
                }
                let flips = [self.flip(), self.flip()];
                let offspring =
                    self.mutate_flipped(vec![(o1, flips[0]), (o2, flips[1])], generation, slot)?;
                if self.config.eager_stop {
                    if let Some(hit) = offspring.iter().find(|o| fitness_or_zero(o) == 2) {
                        let hit = hit.clone();
                        return Ok(self.conclude(&[hit], generation - 1));
                    }
                }
                next.extend(offspring);
            }
            pop = Population {
                members: next,
                generation,
            };
            let max = pop.max_fitness().unwrap_or(0);
            self.log(
                Event::new(EventKind::GenerationComplete, generation)
                    .fitness(max)
                    .detail(format!("population={}", pop.members.len())),
            );
            if pop.first_solution().is_some() {
                return Ok(self.conclude(&pop.members, generation));
            }
        }
        let max_gen = self.config.max_gen;
        Ok(self.conclude(&pop.members, max_gen))
    }

    /// Picks the result from `members`: the first fitness-2 member, or else
    /// the first member of highest fitness.
    fn conclude(mut self, members: &[Individual], generations_run: u32) -> SynthesisResult {
        let best = members
            .iter()
            .enumerate()
            .max_by_key(|(i, m)| (fitness_or_zero(m), std::cmp::Reverse(*i)))
            .map(|(_, m)| m.clone());
        let generation = generations_run;
        match &best {
            Some(b) if fitness_or_zero(b) == 2 => {
                let event = Event::new(EventKind::Solved, generation)
                    .lineage(&b.lineage)
                    .fitness(2);
                self.log(event);
            }
            _ => {
                let mut event = Event::new(EventKind::NotSynthesized, generation);
                if let Some(b) = &best {
                    event = event.fitness(fitness_or_zero(b));
                }
                self.log(event);
            }
        }
        SynthesisResult::finish(Approach::Autoice, best, generations_run, self.ledger, self.transcript)
    }
}

/// Runs the search with a fresh ledger capped at `config.call_cap()`.
pub fn run(
    ctx: SearchContext<'_>,
    req: &Requirement,
    config: &EvolutionConfig,
) -> Result<SynthesisResult, RunError> {
    let ledger = BudgetLedger::new(config.call_cap()?);
    run_with_ledger(ctx, req, config, &ledger)
}

pub fn run_with_ledger(
    ctx: SearchContext<'_>,
    req: &Requirement,
    config: &EvolutionConfig,
    ledger: &BudgetLedger,
) -> Result<SynthesisResult, RunError> {
    Search::new(ctx, req, config.clone(), ledger)?.run()
}
