//! Grids of experiments over randomly generated networks, averaged per row.

use bnsim_core::netgen::{generate, select_low_prior_evidence};
use bnsim_core::{Evidence, NetGenConfig, Network, DEFAULT_BUDGET};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RmseMode;
use crate::experiment::{
    cumulative_evidence, run_phases, summarize, update_label, Method, Oracle, PhasePlan,
    RunResult, RunSettings,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// No observations at all.
    Prior,
    /// Every observation in a single phase.
    All,
    /// A prior phase, then one observation per phase.
    Sequential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub name: String,
    pub method: Method,
    pub schedule: Schedule,
    /// Simulation trials in each phase.
    pub trials: u64,
    /// Search generations in each phase.
    pub generations: usize,
}

impl GridRow {
    pub fn new(name: &str, method: Method, schedule: Schedule, trials: u64, generations: usize) -> Self {
        Self {
            name: name.to_string(),
            method,
            schedule,
            trials,
            generations,
        }
    }

    pub fn phases(&self, evidence: &Evidence) -> Vec<PhasePlan> {
        let phase = |evidence: Evidence| PhasePlan {
            evidence,
            trials: self.trials,
            generations: self.generations,
        };
        match self.schedule {
            Schedule::Prior => vec![phase(Evidence::new())],
            Schedule::All => vec![phase(evidence.clone())],
            Schedule::Sequential => std::iter::once(phase(Evidence::new()))
                .chain(evidence.iter().map(|(n, s)| phase(Evidence::new().with(n, s))))
                .collect(),
        }
    }
}

/// The eight-row comparison: prior, sequential and simultaneous evidence,
/// each with plain simulation and with simulation followed by search.
pub fn standard_grid() -> Vec<GridRow> {
    use Method::*;
    use Schedule::*;
    vec![
        GridRow::new("Fwd-0-obs", Forward, Prior, 10_000, 0),
        GridRow::new("GA/fwd-0-obs", GaForward, Prior, 5_000, 100),
        GridRow::new("Fwd-4-seq", Forward, Sequential, 2_000, 0),
        GridRow::new("Bwd-4-seq", Backward, Sequential, 2_000, 0),
        GridRow::new("GA/fwd-4-seq", GaForward, Sequential, 1_000, 20),
        GridRow::new("Fwd-4-all", Forward, All, 10_000, 0),
        GridRow::new("Bwd-4-all", Backward, All, 10_000, 0),
        GridRow::new("GA/fwd-4-all", GaForward, All, 5_000, 50),
    ]
}

pub struct StudyNetwork {
    pub seed: u64,
    pub net: Network,
    pub evidence: Evidence,
    pub oracle: Option<Oracle>,
}

/// Generates `count` networks with usable leaf evidence, trying successive
/// seeds from `config.seed` and skipping those that fail.
pub fn prepare_networks(
    config: &NetGenConfig,
    count: usize,
    grid: &[GridRow],
    rmse: RmseMode,
) -> anyhow::Result<Vec<StudyNetwork>> {
    config.validate()?;
    let attempts = count.saturating_mul(20).max(20) as u64;
    let mut picked = Vec::new();
    for offset in 0..attempts {
        if picked.len() == count {
            break;
        }
        let seed = config.seed.wrapping_add(offset);
        let cfg = NetGenConfig {
            seed,
            ..config.clone()
        };
        let net = generate(&cfg, &mut cfg.rng())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1eaf);
        match select_low_prior_evidence(&net, cfg.evidence_count, &mut rng) {
            Ok(evidence) => picked.push((seed, net, evidence)),
            Err(e) => warn!("network seed {seed} skipped: {e}"),
        }
    }
    if picked.len() < count {
        warn!("only {} of {count} networks could be generated", picked.len());
    }

    picked
        .into_par_iter()
        .map(|(seed, net, evidence)| {
            let oracle = if rmse == RmseMode::Off {
                None
            } else {
                let all: Vec<Evidence> = grid
                    .iter()
                    .flat_map(|row| {
                        cumulative_evidence(&net, &row.phases(&evidence))
                            .expect("leaf evidence is consistent")
                    })
                    .collect();
                match Oracle::build(&net, &all, DEFAULT_BUDGET) {
                    Ok(o) => Some(o),
                    Err(e) if rmse == RmseMode::On => {
                        return Err(anyhow::anyhow!("network seed {seed}: {e}"))
                    }
                    Err(_) => None,
                }
            };
            Ok(StudyNetwork {
                seed,
                net,
                evidence,
                oracle,
            })
        })
        .collect()
}

/// Seed of the run for network `net_seed` and grid row `row`.
pub fn run_seed(net_seed: u64, row: usize) -> u64 {
    net_seed.wrapping_mul(1_000_003).wrapping_add(row as u64 + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AveragedRow {
    pub experiment: String,
    pub n_obs: usize,
    pub update: &'static str,
    pub method: &'static str,
    pub trials: u64,
    pub n_gen: Option<f64>,
    pub gen_size: Option<usize>,
    pub rmse_archive: Option<f64>,
    pub rmse_frequency: Option<f64>,
    pub mass_archive: Option<f64>,
    pub mass_cond: Option<f64>,
    pub networks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAverage {
    pub experiment: String,
    pub phase: usize,
    pub n_obs: usize,
    pub rmse_frequency: Option<f64>,
    pub rmse_archive: Option<f64>,
    pub mass_total: Option<f64>,
    pub mass_conditional: Option<f64>,
    pub networks: usize,
}

pub struct StudyReport {
    pub network_seeds: Vec<u64>,
    /// `runs[row][network]`; `None` where the run failed.
    pub runs: Vec<Vec<Option<RunResult>>>,
    pub summary: Vec<AveragedRow>,
    pub phases: Vec<PhaseAverage>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs every grid row on every network and averages the results.
pub fn run_random_study(
    networks: &[StudyNetwork],
    grid: &[GridRow],
    base: &RunSettings,
) -> StudyReport {
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|r| (0..networks.len()).map(move |n| (r, n)))
        .collect();
    let results: Vec<Option<RunResult>> = jobs
        .par_iter()
        .map(|&(r, n)| {
            let row = &grid[r];
            let sn = &networks[n];
            let settings = RunSettings {
                method: row.method,
                ..base.clone()
            };
            let phases = row.phases(&sn.evidence);
            match run_phases(&sn.net, &phases, &settings, sn.oracle.as_ref(), run_seed(sn.seed, r)) {
                Ok(run) => Some(run),
                Err(e) => {
                    warn!("{} on network seed {}: {e}", row.name, sn.seed);
                    None
                }
            }
        })
        .collect();

    let mut runs: Vec<Vec<Option<RunResult>>> = vec![Vec::new(); grid.len()];
    for ((r, _), res) in jobs.iter().zip(results) {
        runs[*r].push(res);
    }

    let mut summary = Vec::new();
    let mut phases = Vec::new();
    for (r, row) in grid.iter().enumerate() {
        let done: Vec<(&StudyNetwork, &RunResult)> = networks
            .iter()
            .zip(&runs[r])
            .filter_map(|(sn, run)| run.as_ref().map(|run| (sn, run)))
            .collect();
        let settings = RunSettings {
            method: row.method,
            ..base.clone()
        };
        let rows: Vec<_> = done
            .iter()
            .map(|(sn, run)| summarize(&row.name, &row.phases(&sn.evidence), &settings, run))
            .collect();
        let template = networks
            .first()
            .map(|sn| row.phases(&sn.evidence))
            .unwrap_or_default();
        summary.push(AveragedRow {
            experiment: row.name.clone(),
            n_obs: rows.iter().map(|s| s.n_obs).max().unwrap_or(0),
            update: update_label(&template),
            method: row.method.short(),
            trials: template.iter().map(|p| p.trials).sum(),
            n_gen: row
                .method
                .is_genetic()
                .then(|| mean(rows.iter().map(|s| Some(s.n_gen as f64))))
                .flatten(),
            gen_size: row.method.is_genetic().then_some(base.ga.generation_size),
            rmse_archive: mean(rows.iter().map(|s| s.rmse_archive)),
            rmse_frequency: mean(rows.iter().map(|s| s.rmse_frequency)),
            mass_archive: mean(rows.iter().map(|s| Some(s.mass_archive))),
            mass_cond: mean(rows.iter().map(|s| Some(s.mass_cond))),
            networks: rows.len(),
        });
        if row.schedule == Schedule::Sequential {
            for p in 0..template.len() {
                let ends: Vec<_> = done.iter().filter_map(|(_, run)| run.phases.get(p)).collect();
                phases.push(PhaseAverage {
                    experiment: row.name.clone(),
                    phase: p,
                    n_obs: ends.iter().map(|e| e.observed).max().unwrap_or(0),
                    rmse_frequency: mean(ends.iter().map(|e| e.end.rmse_frequency)),
                    rmse_archive: mean(ends.iter().map(|e| e.end.rmse_archive)),
                    mass_total: mean(ends.iter().map(|e| Some(e.end.mass_total))),
                    mass_conditional: mean(ends.iter().map(|e| Some(e.end.mass_conditional))),
                    networks: ends.len(),
                });
            }
        }
    }

    StudyReport {
        network_seeds: networks.iter().map(|n| n.seed).collect(),
        runs,
        summary,
        phases,
    }
}
