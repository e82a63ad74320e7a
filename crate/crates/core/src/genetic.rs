//! Steady-state genetic search over trials.
//!
//! Genotypes are complete trials clamped to the evidence and the fit is the
//! joint probability. Every unique offspring goes into the [`Archive`], which
//! is where the search pays off: the breeding population only steers where
//! new probability mass is looked for.

use std::collections::HashSet;
use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

use crate::archive::Archive;
use crate::network::{Network, NodeId};
use crate::samplers::{draw_index, Sampler};
use crate::trial::{Evidence, IdCode, Trial};

#[derive(Clone, Debug, PartialEq)]
pub struct GaParams {
    pub generation_size: usize,
    pub breeding_size: usize,
    pub max_generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    /// Consecutive low-gain generations that end the search.
    pub plateau_generations: usize,
    /// Relative evidence-mass gain below which a generation counts as flat.
    pub plateau_epsilon: f64,
    /// Largest neighbourhood radius used by crossover.
    pub max_radius: usize,
    /// Sampler trials allowed when seeding the breeding population.
    pub init_budget: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            generation_size: 50,
            breeding_size: 40,
            max_generations: 50,
            crossover_prob: 0.85,
            mutation_prob: 0.01,
            plateau_generations: 10,
            plateau_epsilon: 1e-4,
            max_radius: 3,
            init_budget: 1000,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |what: &str| Err(GaError::Params(what.to_string()));
        if self.generation_size < 2 {
            return bad("generation_size must be at least 2");
        }
        if self.breeding_size < 2 {
            return bad("breeding_size must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("crossover_prob must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("mutation_prob must lie in [0, 1]");
        }
        if self.max_radius < 1 {
            return bad("max_radius must be at least 1");
        }
        if !(self.plateau_epsilon >= 0.0) {
            return bad("plateau_epsilon must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("invalid search parameters: {0}")]
    Params(String),
    #[error("no conforming trial with positive probability found in {budget} sampler trials")]
    EmptyPopulation { budget: u64 },
    #[error("sampler evidence differs from the archive evidence")]
    EvidenceMismatch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub trial: Trial,
    pub code: IdCode,
    pub fit: f64,
}

/// The best conforming trials seen so far, at most `capacity` of them.
#[derive(Clone, Debug)]
pub struct BreedingPopulation {
    members: Vec<Member>,
    codes: HashSet<IdCode>,
    capacity: usize,
}

impl BreedingPopulation {
    pub fn new(capacity: usize) -> Self {
        Self {
            members: Vec::with_capacity(capacity),
            codes: HashSet::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.capacity
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn contains(&self, code: &IdCode) -> bool {
        self.codes.contains(code)
    }

    pub fn total_fit(&self) -> f64 {
        self.members.iter().map(|m| m.fit).sum()
    }

    pub fn max_fit(&self) -> f64 {
        self.members.iter().map(|m| m.fit).fold(0.0, f64::max)
    }

    pub fn min_fit(&self) -> f64 {
        self.worst().map_or(0.0, |i| self.members[i].fit)
    }

    fn worst(&self) -> Option<usize> {
        (0..self.members.len()).min_by(|&a, &b| self.members[a].fit.total_cmp(&self.members[b].fit))
    }

    /// Adds the member if there is room, or replaces the worst member when
    /// the newcomer is strictly fitter. Duplicates and zero fits are refused.
    pub fn offer(&mut self, member: Member) -> bool {
        if !(member.fit > 0.0) || self.codes.contains(&member.code) {
            return false;
        }
        if !self.is_full() {
            self.codes.insert(member.code.clone());
            self.members.push(member);
            return true;
        }
        match self.worst() {
            Some(i) if member.fit > self.members[i].fit => {
                self.codes.remove(&self.members[i].code);
                self.codes.insert(member.code.clone());
                self.members[i] = member;
                true
            }
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitReport {
    pub from_archive: usize,
    pub sampled: u64,
}

/// Seeds the population with the archive's best conforming trials, then tops
/// it up from `sampler`. Sampled trials are archived as well.
pub fn init_breeders<R: Rng + ?Sized>(
    archive: &mut Archive,
    net: &Network,
    params: &GaParams,
    sampler: &Sampler<'_>,
    rng: &mut R,
) -> Result<(BreedingPopulation, InitReport), GaError> {
    if sampler.evidence() != archive.evidence() {
        return Err(GaError::EvidenceMismatch);
    }
    let mut pop = BreedingPopulation::new(params.breeding_size);
    for (trial, code, fit) in archive.top_conforming(net, params.breeding_size) {
        pop.offer(Member { trial, code, fit });
    }
    let from_archive = pop.len();
    let mut sampled = 0;
    while !pop.is_full() && sampled < params.init_budget {
        sampled += 1;
        let draw = sampler.sample(rng);
        if !(draw.weight > 0.0) || !draw.trial.conforms(archive.evidence()) {
            continue;
        }
        archive.insert(net, &draw.trial);
        let fit = net.joint_unchecked(draw.trial.states());
        let code = net.encode(&draw.trial);
        pop.offer(Member {
            trial: draw.trial,
            code,
            fit,
        });
    }
    if pop.is_empty() {
        return Err(GaError::EmptyPopulation {
            budget: params.init_budget,
        });
    }
    Ok((pop, InitReport { from_archive, sampled }))
}

/// Two independent fit-proportional draws, with replacement.
pub fn select_parents<R: Rng + ?Sized>(pop: &BreedingPopulation, rng: &mut R) -> (usize, usize) {
    let fits: Vec<f64> = pop.members.iter().map(|m| m.fit).collect();
    let total: f64 = fits.iter().sum();
    (draw_index(rng, &fits, total), draw_index(rng, &fits, total))
}

/// `a` with the states of `region` copied from `b`.
pub fn splice(a: &Trial, b: &Trial, region: impl IntoIterator<Item = NodeId>) -> Trial {
    let mut child = a.clone();
    for n in region {
        child.set(n, b.state(n));
    }
    child
}

fn clamp(trial: &mut Trial, evidence: &Evidence) {
    for (n, s) in evidence.iter() {
        trial.set(n, s);
    }
}

/// Neighbourhood crossover: with probability `crossover_prob`, splices a
/// random-radius Markov neighbourhood of a random node from `b` into `a`.
pub fn crossover<R: Rng + ?Sized>(
    a: &Trial,
    b: &Trial,
    net: &Network,
    evidence: &Evidence,
    params: &GaParams,
    rng: &mut R,
) -> Trial {
    if !(rng.gen::<f64>() < params.crossover_prob) {
        return a.clone();
    }
    let center = NodeId(rng.gen_range(0..net.len()));
    let radius = rng.gen_range(1..=params.max_radius.max(1));
    let mut child = splice(a, b, net.markov_neighborhood(center, radius));
    clamp(&mut child, evidence);
    child
}

/// Redraws `node` from its full conditional given every other state.
/// Returns `false`, leaving the state alone, when that conditional has no
/// support.
pub fn resample_node<R: Rng + ?Sized>(
    net: &Network,
    states: &mut [usize],
    node: NodeId,
    rng: &mut R,
) -> bool {
    let weights = full_conditional_weights(net, states, node);
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return false;
    }
    states[node.0] = draw_index(rng, &weights, total);
    true
}

/// Unnormalised `P(node = s | all other states)` for every `s`: the node's
/// own factor times its children's factors.
pub fn full_conditional_weights(net: &Network, states: &mut [usize], node: NodeId) -> Vec<f64> {
    let current = states[node.0];
    let weights = (0..net.cardinality(node))
        .map(|s| {
            states[node.0] = s;
            net.factor(node, states)
                * net
                    .children(node)
                    .iter()
                    .map(|&c| net.factor(c, states))
                    .product::<f64>()
        })
        .collect();
    states[node.0] = current;
    weights
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MutationOutcome {
    pub mutated: usize,
    /// Some chosen node had an all-zero conditional.
    pub flagged: bool,
}

/// Independently resamples each unobserved node with probability
/// `mutation_prob`.
pub fn mutate<R: Rng + ?Sized>(
    trial: &mut Trial,
    net: &Network,
    evidence: &Evidence,
    params: &GaParams,
    rng: &mut R,
) -> MutationOutcome {
    let mut outcome = MutationOutcome::default();
    for n in net.node_ids() {
        if evidence.contains(n) || !(rng.gen::<f64>() < params.mutation_prob) {
            continue;
        }
        if resample_node(net, trial.states_mut(), n, rng) {
            outcome.mutated += 1;
        } else {
            outcome.flagged = true;
        }
    }
    outcome
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GenerationStats {
    pub bred: usize,
    pub new_unique: usize,
    pub mass_gained: f64,
    pub replaced: usize,
    pub flagged: usize,
}

/// Breeds `generation_size` offspring into the archive and population.
pub fn breed_generation<R: Rng + ?Sized>(
    pop: &mut BreedingPopulation,
    archive: &mut Archive,
    net: &Network,
    params: &GaParams,
    rng: &mut R,
) -> GenerationStats {
    let evidence = archive.evidence().clone();
    let before = archive.evidence_mass();
    let mut stats = GenerationStats::default();
    if pop.is_empty() {
        return stats;
    }
    for _ in 0..params.generation_size {
        stats.bred += 1;
        let (ia, ib) = select_parents(pop, rng);
        let mut child = crossover(
            &pop.members[ia].trial,
            &pop.members[ib].trial,
            net,
            &evidence,
            params,
            rng,
        );
        if mutate(&mut child, net, &evidence, params, rng).flagged {
            stats.flagged += 1;
        }
        let fit = net.joint_unchecked(child.states());
        if !(fit > 0.0) {
            continue;
        }
        let code = net.encode(&child);
        if archive.insert_coded(code.clone(), child.states(), fit) {
            stats.new_unique += 1;
        }
        if pop.offer(Member {
            trial: child,
            code,
            fit,
        }) {
            stats.replaced += 1;
        }
    }
    stats.mass_gained = archive.evidence_mass() - before;
    stats
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Plateau,
    MaxGenerations,
    TimeLimit,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Plateau => "plateau",
            StopReason::MaxGenerations => "max-generations",
            StopReason::TimeLimit => "time-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationReport {
    pub generation: usize,
    pub stats: GenerationStats,
    pub evidence_mass: f64,
    pub total_mass: f64,
    pub max_fit: f64,
    pub min_fit: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    pub init: InitReport,
    pub generations: Vec<GenerationReport>,
    pub stop: StopReason,
}

impl SearchReport {
    /// Offspring bred across all generations.
    pub fn bred(&self) -> usize {
        self.generations.iter().map(|g| g.stats.bred).sum()
    }
}

/// Seeds a population and breeds until the evidence mass plateaus, the
/// generation cap is reached, or `time_limit` passes. `observer` sees the
/// seeding report and each generation as it finishes.
pub fn run_search<R: Rng + ?Sized>(
    archive: &mut Archive,
    net: &Network,
    params: &GaParams,
    sampler: &Sampler<'_>,
    time_limit: Option<Duration>,
    rng: &mut R,
    mut observer: impl FnMut(&InitReport, &GenerationReport, &Archive),
) -> Result<SearchReport, GaError> {
    params.validate()?;
    let start = Instant::now();
    let (mut pop, init) = init_breeders(archive, net, params, sampler, rng)?;
    let mut generations = Vec::new();
    let mut flat = 0;
    let stop = loop {
        if generations.len() >= params.max_generations {
            break StopReason::MaxGenerations;
        }
        if time_limit.is_some_and(|limit| start.elapsed() >= limit) {
            break StopReason::TimeLimit;
        }
        let before = archive.evidence_mass();
        let stats = breed_generation(&mut pop, archive, net, params, rng);
        let after = archive.evidence_mass();
        let report = GenerationReport {
            generation: generations.len() + 1,
            stats,
            evidence_mass: after,
            total_mass: archive.total_mass(),
            max_fit: pop.max_fit(),
            min_fit: pop.min_fit(),
        };
        observer(&init, &report, archive);
        generations.push(report);

        let flat_step = if before > 0.0 {
            (after - before) / before < params.plateau_epsilon
        } else {
            after <= 0.0
        };
        flat = if flat_step { flat + 1 } else { 0 };
        if params.plateau_generations > 0 && flat >= params.plateau_generations {
            break StopReason::Plateau;
        }
    };
    Ok(SearchReport {
        init,
        generations,
        stop,
    })
}
