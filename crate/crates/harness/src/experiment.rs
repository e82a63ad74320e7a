//! Phased experiment runs: evidence arrives phase by phase, each phase spends
//! its simulation budget and, for the genetic methods, a number of
//! generations. The frequency tally restarts every phase; the archive keeps
//! everything.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use bnsim_core::exact::{check_budget, exact_posterior, DEFAULT_BUDGET};
use bnsim_core::{
    run_search, Archive, BeliefTable, Evidence, EvidenceError, ExactError, FrequencyTally,
    GaError, GaParams, Network, Sampler, SamplerError, SamplingMethod,
};
use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::rmse;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Logic,
    Forward,
    Backward,
    GaForward,
    GaBackward,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Logic,
        Method::Forward,
        Method::Backward,
        Method::GaForward,
        Method::GaBackward,
    ];

    /// Sampler used for the simulation budget and for seeding the search.
    pub fn sampling(self) -> SamplingMethod {
        match self {
            Method::Logic => SamplingMethod::Logic,
            Method::Forward | Method::GaForward => SamplingMethod::Forward,
            Method::Backward | Method::GaBackward => SamplingMethod::Backward,
        }
    }

    pub fn is_genetic(self) -> bool {
        matches!(self, Method::GaForward | Method::GaBackward)
    }

    /// Short form used in summary tables.
    pub fn short(self) -> &'static str {
        match self.sampling() {
            SamplingMethod::Logic => "logic",
            SamplingMethod::Forward => "fwd",
            SamplingMethod::Backward => "bwd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Logic => "logic",
            Method::Forward => "forward",
            Method::Backward => "backward",
            Method::GaForward => "ga-forward",
            Method::GaBackward => "ga-backward",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| {
                format!("unknown method `{s}` (logic, forward, backward, ga-forward, ga-backward)")
            })
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("exact solution unavailable: {0}")]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error("phase {phase} observes `{node}` again with a different state")]
    Conflict { phase: usize, node: String },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Search(#[from] GaError),
    #[error("{0}")]
    Config(String),
}

/// Observations added by one phase and the work done in it.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePlan {
    pub evidence: Evidence,
    pub trials: u64,
    /// Generations of genetic search after the simulation budget.
    pub generations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Estimators {
    pub frequency: bool,
    pub archive: bool,
}

impl Default for Estimators {
    fn default() -> Self {
        Self {
            frequency: true,
            archive: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub method: Method,
    pub ga: GaParams,
    /// Record a trace row every `stride` simulation trials; 0 disables.
    pub stride: u64,
    pub estimators: Estimators,
    pub time_limit: Option<Duration>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            method: Method::Forward,
            ga: GaParams::default(),
            stride: 100,
            estimators: Estimators::default(),
            time_limit: None,
        }
    }
}

/// Exact posteriors keyed by evidence.
#[derive(Clone, Debug, Default)]
pub struct Oracle {
    solutions: HashMap<Evidence, BeliefTable>,
}

impl Oracle {
    /// Solves every distinct evidence set, refusing networks over `budget`.
    pub fn build<'a>(
        net: &Network,
        evidence: impl IntoIterator<Item = &'a Evidence>,
        budget: u128,
    ) -> Result<Self, ExactError> {
        check_budget(net, budget)?;
        let mut solutions = HashMap::new();
        for ev in evidence {
            if !solutions.contains_key(ev) {
                let sol = exact_posterior(net, ev, budget)?;
                solutions.insert(ev.clone(), sol.posterior);
            }
        }
        Ok(Self { solutions })
    }

    pub fn get(&self, evidence: &Evidence) -> Option<&BeliefTable> {
        self.solutions.get(evidence)
    }
}

/// Cumulative evidence in force during each phase.
pub fn cumulative_evidence(
    net: &Network,
    phases: &[PhasePlan],
) -> Result<Vec<Evidence>, ExperimentError> {
    let mut current = Evidence::new();
    let mut out = Vec::with_capacity(phases.len());
    for (i, phase) in phases.iter().enumerate() {
        phase.evidence.validate(net)?;
        for (node, state) in phase.evidence.iter() {
            if let Some(old) = current.insert(node, state) {
                if old != state {
                    return Err(ExperimentError::Conflict {
                        phase: i,
                        node: net.node(node).name.clone(),
                    });
                }
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub phase: usize,
    /// Cumulative trials, counting bred offspring.
    pub trials: u64,
    pub rmse_frequency: Option<f64>,
    pub rmse_archive: Option<f64>,
    pub mass_total: f64,
    pub mass_conditional: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseResult {
    pub phase: usize,
    pub observed: usize,
    /// Archive error before the phase drew any trial.
    pub start_rmse_archive: Option<f64>,
    /// Error of the freshly reset frequency tally.
    pub start_rmse_frequency: Option<f64>,
    pub start_conforming: usize,
    pub end: TraceRow,
    pub simulated: u64,
    pub generations: usize,
    pub bred: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub trace: Vec<TraceRow>,
    pub phases: Vec<PhaseResult>,
    pub simulated: u64,
    pub generations: usize,
}

impl RunResult {
    pub fn last(&self) -> &TraceRow {
        &self.phases.last().expect("at least one phase").end
    }
}

struct Recorder<'a> {
    exact: Option<&'a BeliefTable>,
    estimators: Estimators,
    trace: Vec<TraceRow>,
}

impl Recorder<'_> {
    fn row(&self, phase: usize, trials: u64, tally: &FrequencyTally, archive: &Archive) -> TraceRow {
        let score = |on: bool, est: BeliefTable| {
            self.exact
                .filter(|_| on)
                .map(|exact| rmse(&est, exact).expect("same network"))
        };
        TraceRow {
            phase,
            trials,
            rmse_frequency: score(self.estimators.frequency, tally.estimate()),
            rmse_archive: score(self.estimators.archive, archive.posterior()),
            mass_total: archive.total_mass(),
            mass_conditional: archive.evidence_mass(),
        }
    }

    fn record(&mut self, phase: usize, trials: u64, tally: &FrequencyTally, archive: &Archive) {
        let row = self.row(phase, trials, tally, archive);
        self.trace.push(row);
    }
}

/// Runs every phase on `net` from one seed. With an oracle, each phase's
/// cumulative evidence must have an exact solution in it.
pub fn run_phases(
    net: &Network,
    phases: &[PhasePlan],
    settings: &RunSettings,
    oracle: Option<&Oracle>,
    seed: u64,
) -> Result<RunResult, ExperimentError> {
    if phases.is_empty() {
        return Err(ExperimentError::Config("an experiment needs at least one phase".into()));
    }
    if !settings.estimators.frequency && !settings.estimators.archive {
        return Err(ExperimentError::Config("select at least one estimator".into()));
    }
    if settings.method.is_genetic() {
        settings.ga.validate()?;
    } else if phases.iter().any(|p| p.generations > 0) {
        return Err(ExperimentError::Config(format!(
            "method {} does not run generations",
            settings.method
        )));
    }
    let evidence = cumulative_evidence(net, phases)?;
    let exact: Vec<Option<&BeliefTable>> = match oracle {
        Some(o) => evidence
            .iter()
            .map(|ev| {
                o.get(ev).map(Some).ok_or_else(|| {
                    ExperimentError::Config(format!("oracle lacks evidence {ev}"))
                })
            })
            .collect::<Result<_, _>>()?,
        None => vec![None; phases.len()],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = Archive::new(net);
    let mut tally = FrequencyTally::new(net);
    let mut trials = 0u64;
    let mut simulated = 0u64;
    let mut total_generations = 0usize;
    let mut results = Vec::with_capacity(phases.len());
    let mut rec = Recorder {
        exact: None,
        estimators: settings.estimators,
        trace: Vec::new(),
    };

    for (index, (plan, ev)) in phases.iter().zip(&evidence).enumerate() {
        rec.exact = exact[index];
        archive.set_evidence(net, ev)?;
        tally.reset();
        let start = rec.row(index, trials, &tally, &archive);
        let start_conforming = archive.conforming_count();
        rec.trace.push(start.clone());

        let mut sampling = settings.method.sampling();
        if sampling == SamplingMethod::Backward && ev.is_empty() {
            debug!("phase {index}: no evidence, backward simulation runs forward");
            sampling = SamplingMethod::Forward;
        }
        let sampler = Sampler::new(net, ev, sampling)?;
        for _ in 0..plan.trials {
            let draw = sampler.sample(&mut rng);
            archive.insert(net, &draw.trial);
            tally.record(&draw);
            trials += 1;
            if settings.stride > 0 && trials.is_multiple_of(settings.stride) {
                rec.record(index, trials, &tally, &archive);
            }
        }
        simulated += plan.trials;

        let mut generations = 0;
        let mut bred = 0u64;
        if settings.method.is_genetic() && plan.generations > 0 {
            let params = GaParams {
                max_generations: plan.generations,
                ..settings.ga.clone()
            };
            let base = trials;
            let outcome = run_search(
                &mut archive,
                net,
                &params,
                &sampler,
                settings.time_limit,
                &mut rng,
                |init, gen, archive| {
                    bred += gen.stats.bred as u64;
                    rec.record(index, base + init.sampled + bred, &tally, archive);
                },
            );
            match outcome {
                Ok(report) => {
                    generations = report.generations.len();
                    trials = base + report.init.sampled + bred;
                    debug!(
                        "phase {index}: search stopped ({}) after {generations} generations",
                        report.stop
                    );
                }
                Err(GaError::EmptyPopulation { budget }) => {
                    trials = base + budget;
                    warn!("phase {index}: no conforming trial to breed from, search skipped");
                }
                Err(e) => return Err(e.into()),
            }
        }
        total_generations += generations;

        let end = rec.row(index, trials, &tally, &archive);
        if rec.trace.last() != Some(&end) {
            rec.trace.push(end.clone());
        }
        results.push(PhaseResult {
            phase: index,
            observed: ev.len(),
            start_rmse_archive: start.rmse_archive,
            start_rmse_frequency: start.rmse_frequency,
            start_conforming,
            end,
            simulated: plan.trials,
            generations,
            bred,
        });
    }

    Ok(RunResult {
        trace: rec.trace,
        phases: results,
        simulated,
        generations: total_generations,
    })
}

/// Builds the oracle for `phases` when the network can be enumerated.
pub fn oracle_for(
    net: &Network,
    phases: &[PhasePlan],
    required: bool,
) -> Result<Option<Oracle>, ExperimentError> {
    let evidence = cumulative_evidence(net, phases)?;
    match Oracle::build(net, &evidence, DEFAULT_BUDGET) {
        Ok(o) => Ok(Some(o)),
        Err(e @ ExactError::BudgetExceeded { .. }) if required => Err(e.into()),
        Err(ExactError::BudgetExceeded { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// One row of a Table-4.1-style summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub n_obs: usize,
    pub update: &'static str,
    pub method: &'static str,
    /// Simulation trials across all phases; bred offspring excluded.
    pub trials: u64,
    pub n_gen: usize,
    pub gen_size: Option<usize>,
    pub rmse_archive: Option<f64>,
    pub rmse_frequency: Option<f64>,
    pub mass_archive: f64,
    pub mass_cond: f64,
}

/// `seq` when observations arrive over several phases, `all` when at once.
pub fn update_label(phases: &[PhasePlan]) -> &'static str {
    match phases.iter().filter(|p| !p.evidence.is_empty()).count() {
        0 => "",
        1 => "all",
        _ => "seq",
    }
}

pub fn summarize(
    name: &str,
    phases: &[PhasePlan],
    settings: &RunSettings,
    result: &RunResult,
) -> SummaryRow {
    let last = result.last();
    SummaryRow {
        experiment: name.to_string(),
        n_obs: result.phases.last().map_or(0, |p| p.observed),
        update: update_label(phases),
        method: settings.method.short(),
        trials: result.simulated,
        n_gen: result.generations,
        gen_size: settings
            .method
            .is_genetic()
            .then_some(settings.ga.generation_size),
        rmse_archive: last.rmse_archive,
        rmse_frequency: last.rmse_frequency,
        mass_archive: last.mass_total,
        mass_cond: last.mass_conditional,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bnsim_core::{NetworkBuilder, NodeId};

    fn net() -> Network {
        let mut b = NetworkBuilder::new("exp");
        let a = b.add_node("A", 2);
        let c = b.add_node("B", 2);
        let d = b.add_node("C", 3);
        b.set_parents(c, &[a]).set_parents(d, &[a, c]);
        b.set_cpt(a, vec![0.7, 0.3]);
        b.set_cpt(c, vec![0.8, 0.2, 0.1, 0.9]);
        b.set_cpt(
            d,
            vec![0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.05, 0.05, 0.9, 0.3, 0.3, 0.4],
        );
        b.build().unwrap()
    }

    fn phases() -> Vec<PhasePlan> {
        vec![
            PhasePlan {
                evidence: Evidence::new(),
                trials: 300,
                generations: 0,
            },
            PhasePlan {
                evidence: Evidence::new().with(NodeId(2), 2),
                trials: 300,
                generations: 0,
            },
            PhasePlan {
                evidence: Evidence::new().with(NodeId(1), 1),
                trials: 300,
                generations: 2,
            },
        ]
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>(), Ok(m));
        }
        assert!("gibbs".parse::<Method>().is_err());
    }

    #[test]
    fn conflicting_observations_are_rejected() {
        let net = net();
        let mut p = phases();
        p[2].evidence = Evidence::new().with(NodeId(2), 0);
        assert!(matches!(
            cumulative_evidence(&net, &p),
            Err(ExperimentError::Conflict { phase: 2, .. })
        ));
    }

    #[test]
    fn generations_need_a_genetic_method() {
        let net = net();
        let settings = RunSettings::default();
        assert!(matches!(
            run_phases(&net, &phases(), &settings, None, 1),
            Err(ExperimentError::Config(_))
        ));
    }

    #[test]
    fn trace_follows_phase_rules() {
        let net = net();
        let p = phases();
        let oracle = oracle_for(&net, &p, true).unwrap();
        let settings = RunSettings {
            method: Method::GaForward,
            stride: 50,
            ..RunSettings::default()
        };
        let run = run_phases(&net, &p, &settings, oracle.as_ref(), 3).unwrap();
        assert_eq!(run.phases.len(), 3);
        assert_eq!(run.simulated, 900);
        for w in run.trace.windows(2) {
            assert!(w[0].mass_total <= w[1].mass_total);
            assert!(w[0].trials <= w[1].trials);
            if w[0].phase == w[1].phase {
                assert!(w[0].mass_conditional <= w[1].mass_conditional);
            }
        }
        for phase in &run.phases {
            let fresh = phase.start_rmse_frequency.unwrap();
            let kept = phase.start_rmse_archive.unwrap();
            assert!(kept <= fresh);
            if phase.start_conforming > 0 {
                assert!(kept < fresh);
            }
        }
        let summary = summarize("t", &p, &settings, &run);
        assert_eq!(summary.update, "seq");
        assert_eq!(summary.n_obs, 2);
        assert_eq!(summary.gen_size, Some(50));
        assert_eq!(summary.mass_archive, run.last().mass_total);
    }

    #[test]
    fn runs_are_reproducible() {
        let net = net();
        let p = phases();
        let settings = RunSettings {
            method: Method::GaBackward,
            ..RunSettings::default()
        };
        let a = run_phases(&net, &p, &settings, None, 9).unwrap();
        let b = run_phases(&net, &p, &settings, None, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.iter().all(|r| r.rmse_archive.is_none()));
    }

    #[test]
    fn zero_budget_phase_keeps_archive_estimate() {
        let net = net();
        let mut p = phases();
        p[1].trials = 0;
        p[2].trials = 0;
        p[2].generations = 0;
        let oracle = oracle_for(&net, &p, true).unwrap();
        let run = run_phases(&net, &p, &RunSettings::default(), oracle.as_ref(), 4).unwrap();
        let later: Vec<_> = run.trace.iter().filter(|r| r.phase > 0).collect();
        assert_eq!(later.len(), 2);
        assert!(later.iter().all(|r| r.rmse_archive.unwrap() < 1.0));
    }
}
