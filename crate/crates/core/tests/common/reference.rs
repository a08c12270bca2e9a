//! Straight-line model of the search loop used as a test oracle. It tracks
//! only (origin, fitness) per member and consumes the rng in the documented
//! order: elite tie draws, then per pair two parent draws and two coin flips.

use evoverif_core::transcript::{EventKind, TranscriptEvent};
use evoverif_core::Origin;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub kind: EventKind,
    pub generation: u32,
    pub slot: Option<usize>,
    pub origin: Option<Origin>,
    pub fitness: Option<u8>,
    pub calls_used: u64,
    pub parents: Option<(usize, usize)>,
}

impl Expected {
    pub fn of(e: &TranscriptEvent) -> Self {
        let parents = (e.kind == EventKind::Parents).then(|| {
            let d = e.detail.as_deref().unwrap_or_default();
            let (a, b) = d.split_once(',').expect("parents detail is `i,j`");
            (a.parse().unwrap(), b.parse().unwrap())
        });
        Self {
            kind: e.kind,
            generation: e.generation,
            slot: e.slot,
            origin: e.lineage.as_ref().map(|l| l.origin),
            fitness: e.fitness,
            calls_used: e.calls_used,
            parents,
        }
    }
}

pub struct Model {
    pub p_init: usize,
    pub n_elite: usize,
    pub population: usize,
    pub max_gen: u32,
    pub mutate_rate: f64,
    /// Fitness of the individual produced by crossover call number `seq`.
    pub crossover_fitness: Box<dyn Fn(u64) -> u8>,
    pub init_fitness: Box<dyn Fn(usize) -> u8>,
    pub mutation_fitness: u8,
}

pub struct Outcome {
    pub events: Vec<Expected>,
    pub solved: bool,
    pub generations_run: u32,
    pub calls: u64,
}

fn ev(kind: EventKind, generation: u32, calls: u64) -> Expected {
    Expected {
        kind,
        generation,
        slot: None,
        origin: None,
        fitness: None,
        calls_used: calls,
        parents: None,
    }
}

impl Model {
    pub fn simulate(&self, seed: u64) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = Vec::new();
        let mut calls = 2 * self.p_init as u64;
        let mut pop: Vec<(Origin, u8)> = (0..self.p_init).map(|i| (Origin::Init, (self.init_fitness)(i))).collect();
        for (i, m) in pop.iter().enumerate() {
            events.push(Expected {
                slot: Some(i),
                origin: Some(m.0),
                fitness: Some(m.1),
                ..ev(EventKind::Initialized, 0, calls)
            });
        }
        let finish = |events: &mut Vec<Expected>, pop: &[(Origin, u8)], g: u32, calls: u64| {
            let best = pop.iter().map(|m| m.1).max().unwrap();
            let first = pop.iter().find(|m| m.1 == best).unwrap();
            if best == 2 {
                events.push(Expected {
                    origin: Some(first.0),
                    fitness: Some(2),
                    ..ev(EventKind::Solved, g, calls)
                });
            } else {
                events.push(Expected {
                    fitness: Some(best),
                    ..ev(EventKind::NotSynthesized, g, calls)
                });
            }
            best == 2
        };
        if pop.iter().any(|m| m.1 == 2) {
            finish(&mut events, &pop, 0, calls);
            return Outcome { events, solved: true, generations_run: 0, calls };
        }
        let mut xseq = 0u64;
        for g in 1..=self.max_gen {
            // elites
            let mut fits: Vec<u8> = pop.iter().map(|m| m.1).collect();
            fits.sort_unstable_by(|a, b| b.cmp(a));
            let cut = fits[self.n_elite - 1];
            let mut chosen: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].1 > cut).collect();
            let mut ties: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].1 == cut).collect();
            let need = self.n_elite - chosen.len();
            if ties.len() > need {
                for k in 0..need {
                    let j = rng.random_range(k..ties.len());
                    ties.swap(k, j);
                }
            }
            chosen.extend_from_slice(&ties[..need]);
            chosen.sort_unstable();
            let mut next: Vec<(Origin, u8)> = chosen.iter().map(|&i| pop[i]).collect();
            for (slot, m) in next.iter().enumerate() {
                events.push(Expected {
                    slot: Some(slot),
                    origin: Some(m.0),
                    fitness: Some(m.1),
                    ..ev(EventKind::Elite, g, calls)
                });
            }
            while next.len() < self.population {
                let max = pop.iter().map(|m| m.1).max().unwrap();
                let top: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].1 == max).collect();
                let (i, j) = if top.len() >= 2 {
                    let a = rng.random_range(0..top.len());
                    let mut b = rng.random_range(0..top.len() - 1);
                    if b >= a {
                        b += 1;
                    }
                    (top[a], top[b])
                } else {
                    let second = pop.iter().map(|m| m.1).filter(|&f| f < max).max().unwrap();
                    let tier: Vec<usize> = (0..pop.len()).filter(|&k| pop[k].1 == second).collect();
                    (top[0], tier[rng.random_range(0..tier.len())])
                };
                let slot = next.len();
                events.push(Expected {
                    slot: Some(slot),
                    parents: Some((i, j)),
                    ..ev(EventKind::Parents, g, calls)
                });
                calls += 2;
                let mut kids = [
                    (Origin::Crossover, (self.crossover_fitness)(xseq)),
                    (Origin::Crossover, (self.crossover_fitness)(xseq + 1)),
                ];
                xseq += 2;
                for (k, kid) in kids.iter().enumerate() {
                    events.push(Expected {
                        slot: Some(slot + k),
                        origin: Some(kid.0),
                        fitness: Some(kid.1),
                        ..ev(EventKind::Crossover, g, calls)
                    });
                }
                let flips: [bool; 2] = [
                    rng.random::<f64>() < self.mutate_rate,
                    rng.random::<f64>() < self.mutate_rate,
                ];
                calls += flips.iter().filter(|&&f| f).count() as u64;
                for k in 0..2 {
                    if flips[k] {
                        kids[k] = (Origin::Mutation, self.mutation_fitness);
                        events.push(Expected {
                            slot: Some(slot + k),
                            origin: Some(Origin::Mutation),
                            fitness: Some(self.mutation_fitness),
                            ..ev(EventKind::Mutation, g, calls)
                        });
                    }
                }
                next.extend(kids);
            }
            pop = next;
            let best = pop.iter().map(|m| m.1).max().unwrap();
            events.push(Expected {
                fitness: Some(best),
                ..ev(EventKind::GenerationComplete, g, calls)
            });
            if best == 2 {
                finish(&mut events, &pop, g, calls);
                return Outcome { events, solved: true, generations_run: g, calls };
            }
        }
        finish(&mut events, &pop, self.max_gen, calls);
        Outcome { events, solved: false, generations_run: self.max_gen, calls }
    }
}
