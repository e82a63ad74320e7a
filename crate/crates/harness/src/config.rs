//! Experiment configuration files.
//!
//! ```text
//! [experiment]
//! name = ga-seq
//! network = plant.net        # a path, `demo`, or `generated`
//! method = ga-forward
//! seeds = 1, 2, 3
//! stride = 100
//!
//! [ga]
//! generation_size = 50
//!
//! [phase]
//! trials = 1000
//!
//! [phase]
//! evidence = S1=1, S3=0
//! trials = 1000
//! generations = 20
//! ```
//!
//! Each `[phase]` section starts a new phase. Paths are relative to the
//! configuration file.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use bnsim_core::{GaParams, NetGenConfig};
use thiserror::Error;

use crate::experiment::{Estimators, Method};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkSource {
    File(PathBuf),
    Demo,
    Generated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmseMode {
    /// Score when the network can be enumerated.
    Auto,
    On,
    Off,
}

/// Phase as written: evidence is resolved once the network is loaded.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PhaseSpec {
    pub evidence: String,
    pub trials: u64,
    pub generations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentFile {
    pub name: String,
    pub network: NetworkSource,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub stride: u64,
    pub rmse: RmseMode,
    pub estimators: Estimators,
    pub time_limit: Option<Duration>,
    pub ga: GaParams,
    pub netgen: NetGenConfig,
    pub phases: Vec<PhaseSpec>,
}

impl Default for ExperimentFile {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            network: NetworkSource::Demo,
            method: Method::Forward,
            seeds: vec![0],
            stride: 100,
            rmse: RmseMode::Auto,
            estimators: Estimators::default(),
            time_limit: None,
            ga: GaParams::default(),
            netgen: NetGenConfig::default(),
            phases: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Experiment,
    Ga,
    NetGen,
    Phase,
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::Value {
        line,
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(line, key, s))
        .collect()
}

/// Parses configuration text. `base` resolves relative network paths.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentFile, ConfigError> {
    let mut cfg = ExperimentFile::default();
    let mut section = Section::Top;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: "unterminated section header".into(),
                })?
                .trim();
            section = match name {
                "experiment" => Section::Experiment,
                "ga" => Section::Ga,
                "netgen" => Section::NetGen,
                "phase" => {
                    cfg.phases.push(PhaseSpec::default());
                    Section::Phase
                }
                other => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        section: other.to_string(),
                    })
                }
            };
            continue;
        }
        let (key, raw_value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let v = raw_value.trim();
        let unknown = |section: &str| ConfigError::UnknownKey {
            line,
            section: section.to_string(),
            key: key.to_string(),
        };

        match section {
            Section::Top => {
                return Err(ConfigError::Syntax {
                    line,
                    message: "key outside any section".into(),
                })
            }
            Section::Experiment => match key {
                "name" => cfg.name = v.to_string(),
                "network" => {
                    cfg.network = match v {
                        "demo" => NetworkSource::Demo,
                        "generated" => NetworkSource::Generated,
                        path => NetworkSource::File(base.join(path)),
                    }
                }
                "method" => cfg.method = value(line, key, v)?,
                "seeds" => cfg.seeds = list(line, key, v)?,
                "stride" => cfg.stride = value(line, key, v)?,
                "rmse" => {
                    cfg.rmse = match v {
                        "auto" => RmseMode::Auto,
                        "on" | "true" => RmseMode::On,
                        "off" | "false" => RmseMode::Off,
                        _ => {
                            return Err(ConfigError::Value {
                                line,
                                key: key.into(),
                                message: "expected auto, on or off".into(),
                            })
                        }
                    }
                }
                "estimators" => {
                    let mut est = Estimators {
                        frequency: false,
                        archive: false,
                    };
                    for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        match name {
                            "frequency" => est.frequency = true,
                            "archive" => est.archive = true,
                            other => {
                                return Err(ConfigError::Value {
                                    line,
                                    key: key.into(),
                                    message: format!("unknown estimator `{other}`"),
                                })
                            }
                        }
                    }
                    cfg.estimators = est;
                }
                "time_limit_ms" => {
                    cfg.time_limit = Some(Duration::from_millis(value(line, key, v)?))
                }
                _ => return Err(unknown("experiment")),
            },
            Section::Ga => {
                let ga = &mut cfg.ga;
                match key {
                    "generation_size" => ga.generation_size = value(line, key, v)?,
                    "breeding_size" => ga.breeding_size = value(line, key, v)?,
                    "max_generations" => ga.max_generations = value(line, key, v)?,
                    "crossover_prob" => ga.crossover_prob = value(line, key, v)?,
                    "mutation_prob" => ga.mutation_prob = value(line, key, v)?,
                    "plateau_generations" => ga.plateau_generations = value(line, key, v)?,
                    "plateau_epsilon" => ga.plateau_epsilon = value(line, key, v)?,
                    "max_radius" => ga.max_radius = value(line, key, v)?,
                    "init_budget" => ga.init_budget = value(line, key, v)?,
                    _ => return Err(unknown("ga")),
                }
            }
            Section::NetGen => {
                let ng = &mut cfg.netgen;
                match key {
                    "node_count" => ng.node_count = value(line, key, v)?,
                    "max_parents" => ng.max_parents = value(line, key, v)?,
                    "cardinality_weights" => {
                        let w: Vec<f64> = list(line, key, v)?;
                        ng.cardinality_weights =
                            w.try_into().map_err(|_| ConfigError::Value {
                                line,
                                key: key.into(),
                                message: "expected three weights for 2, 3 and 4 states".into(),
                            })?;
                    }
                    "zero_cell_prob" => ng.zero_cell_prob = value(line, key, v)?,
                    "evidence_count" => ng.evidence_count = value(line, key, v)?,
                    "seed" => ng.seed = value(line, key, v)?,
                    _ => return Err(unknown("netgen")),
                }
            }
            Section::Phase => {
                let phase = cfg.phases.last_mut().expect("phase section pushed a phase");
                match key {
                    "evidence" => phase.evidence = v.to_string(),
                    "trials" => phase.trials = value(line, key, v)?,
                    "generations" => phase.generations = value(line, key, v)?,
                    _ => return Err(unknown("phase")),
                }
            }
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentFile {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.phases.is_empty() {
            return invalid("at least one [phase] section is required");
        }
        if self.seeds.is_empty() {
            return invalid("seeds must list at least one seed");
        }
        if !self.estimators.frequency && !self.estimators.archive {
            return invalid("estimators must name frequency, archive or both");
        }
        if !self.method.is_genetic() && self.phases.iter().any(|p| p.generations > 0) {
            return invalid("generations need method ga-forward or ga-backward");
        }
        self.ga
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.network == NetworkSource::Generated {
            self.netgen
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}

pub fn read_config(path: &Path) -> Result<ExperimentFile, anyhow::Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_config(&text, base)?)
}
