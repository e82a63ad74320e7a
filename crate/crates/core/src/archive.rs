//! Store of unique trials and the partial-sum posterior estimator.
//!
//! Each trial is kept once, keyed by its id code, together with its joint
//! probability. For the current evidence the archive keeps the conforming
//! mass and, per node and state, the conforming mass that also has that state.
//! Their ratio is the archive estimate of the posterior.
//!
//! An archive is tied to one immutable [`Network`]; probabilities are not
//! recomputed, so a network with different link matrices needs a new archive.
//! Single writer: concurrent inserts need external serialisation.

use std::fmt::Write as _;

use indexmap::IndexMap;
use thiserror::Error;

use crate::belief::BeliefTable;
use crate::network::Network;
use crate::trial::{conforms, CodeError, Evidence, EvidenceError, IdCode, Trial};

/// Relative tolerance when checking snapshot probabilities against the network.
const SNAPSHOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("snapshot is for network `{found}`, not `{expected}`")]
    Network { expected: String, found: String },
    #[error("line {line}: {source}")]
    Code { line: usize, source: CodeError },
    #[error("line {line}: stored probability {stored} disagrees with the network ({actual})")]
    Stale {
        line: usize,
        stored: f64,
        actual: f64,
    },
    #[error("header promises {expected} entries, found {found}")]
    Count { expected: usize, found: usize },
}

#[derive(Clone, Debug)]
pub struct Archive {
    entries: IndexMap<IdCode, f64>,
    total_mass: f64,
    evidence: Evidence,
    evidence_mass: f64,
    conforming: Vec<Vec<f64>>,
    conforming_count: usize,
}

impl Archive {
    pub fn new(net: &Network) -> Self {
        Self {
            entries: IndexMap::new(),
            total_mass: 0.0,
            evidence: Evidence::new(),
            evidence_mass: 0.0,
            conforming: net.nodes().iter().map(|n| vec![0.0; n.cardinality]).collect(),
            conforming_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `P^T`: total joint probability of every stored trial.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `P^T(X_E)`: stored mass conforming to the current evidence.
    pub fn evidence_mass(&self) -> f64 {
        self.evidence_mass
    }

    pub fn conforming_count(&self) -> usize {
        self.conforming_count
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn contains(&self, code: &IdCode) -> bool {
        self.entries.contains_key(code)
    }

    pub fn probability(&self, code: &IdCode) -> Option<f64> {
        self.entries.get(code).copied()
    }

    /// Stored entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&IdCode, f64)> {
        self.entries.iter().map(|(c, &p)| (c, p))
    }

    /// Per node and state, the stored mass conforming to both that state and
    /// the evidence.
    pub fn conforming_sums(&self) -> &[Vec<f64>] {
        &self.conforming
    }

    /// Stores `trial` if it is new and has positive probability. Returns
    /// whether it was stored.
    pub fn insert(&mut self, net: &Network, trial: &Trial) -> bool {
        let code = net.encode(trial);
        if self.entries.contains_key(&code) {
            return false;
        }
        let p = net.joint_unchecked(trial.states());
        self.insert_coded(code, trial.states(), p)
    }

    /// Like [`Archive::insert`] with the code and probability already known.
    pub(crate) fn insert_coded(&mut self, code: IdCode, states: &[usize], p: f64) -> bool {
        if p <= 0.0 || self.entries.contains_key(&code) {
            return false;
        }
        self.entries.insert(code, p);
        self.total_mass += p;
        if conforms(states, &self.evidence) {
            self.add_conforming(states, p);
        }
        true
    }

    fn add_conforming(&mut self, states: &[usize], p: f64) {
        self.evidence_mass += p;
        self.conforming_count += 1;
        for (row, &s) in self.conforming.iter_mut().zip(states) {
            row[s] += p;
        }
    }

    /// Replaces the evidence and rebuilds the conforming sums by a full scan.
    /// Returns the number of conforming trials.
    pub fn set_evidence(
        &mut self,
        net: &Network,
        evidence: &Evidence,
    ) -> Result<usize, EvidenceError> {
        evidence.validate(net)?;
        self.evidence = evidence.clone();
        self.evidence_mass = 0.0;
        self.conforming_count = 0;
        self.conforming.iter_mut().for_each(|row| row.fill(0.0));

        let layout = net.layout();
        let mut states = vec![0; net.len()];
        let entries = std::mem::take(&mut self.entries);
        for (code, &p) in &entries {
            layout
                .decode_into(code, &mut states)
                .expect("archive codes come from this network");
            if conforms(&states, evidence) {
                self.add_conforming(&states, p);
            }
        }
        self.entries = entries;
        Ok(self.conforming_count)
    }

    /// `P^T(X_n & X_E) / P^T(X_E)`; undefined when no conforming mass exists.
    pub fn posterior(&self) -> BeliefTable {
        BeliefTable::from_partial_sums(&self.conforming, self.evidence_mass)
    }

    /// The `k` most probable conforming trials, ties by ascending id code.
    pub fn top_conforming(&self, net: &Network, k: usize) -> Vec<(Trial, IdCode, f64)> {
        let layout = net.layout();
        let mut states = vec![0; net.len()];
        let mut found: Vec<(&IdCode, f64)> = self
            .entries
            .iter()
            .filter(|(code, _)| {
                layout.decode_into(code, &mut states).is_ok() && conforms(&states, &self.evidence)
            })
            .map(|(c, &p)| (c, p))
            .collect();
        found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        found
            .into_iter()
            .take(k)
            .map(|(code, p)| {
                let trial = layout.decode(code).expect("archive codes come from this network");
                (trial, code.clone(), p)
            })
            .collect()
    }

    /// Sum of stored probabilities, recomputed.
    pub fn recomputed_total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Text snapshot: a header line then `hex-code probability` per entry.
    pub fn write_snapshot(&self, net: &Network) -> String {
        let layout = net.layout();
        let mut out = String::new();
        writeln!(out, "archive {} {}", net.name(), self.entries.len()).unwrap();
        for (code, p) in &self.entries {
            writeln!(out, "{} {}", layout.to_hex(code), p).unwrap();
        }
        out
    }

    /// Restores a snapshot written for `net`, checking every probability.
    /// The restored archive has empty evidence.
    pub fn read_snapshot(net: &Network, text: &str) -> Result<Self, SnapshotError> {
        let syntax = |line: usize, message: &str| SnapshotError::Syntax {
            line,
            message: message.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or_else(|| syntax(1, "empty snapshot"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let expected = match fields.as_slice() {
            ["archive", name, count] => {
                if *name != net.name() {
                    return Err(SnapshotError::Network {
                        expected: net.name().to_string(),
                        found: name.to_string(),
                    });
                }
                count
                    .parse::<usize>()
                    .map_err(|_| syntax(line, "bad entry count"))?
            }
            _ => return Err(syntax(line, "expected `archive <net-name> <entry-count>`")),
        };

        let mut archive = Archive::new(net);
        let mut found = 0;
        for (line, text) in lines {
            let (hex, prob) = text
                .split_once(|c: char| c == ',' || c.is_whitespace())
                .ok_or_else(|| syntax(line, "expected `<hex-code> <probability>`"))?;
            let code = net
                .layout()
                .from_hex(hex.trim())
                .map_err(|source| SnapshotError::Code { line, source })?;
            let stored: f64 = prob
                .trim()
                .parse()
                .map_err(|_| syntax(line, "bad probability"))?;
            let trial = net.decode(&code).map_err(|source| SnapshotError::Code { line, source })?;
            let actual = net.joint_unchecked(trial.states());
            if !(actual > 0.0) || (stored - actual).abs() > SNAPSHOT_TOLERANCE * actual {
                return Err(SnapshotError::Stale {
                    line,
                    stored,
                    actual,
                });
            }
            if !archive.insert_coded(code, trial.states(), stored) {
                return Err(syntax(line, "duplicate entry"));
            }
            found += 1;
        }
        if found != expected {
            return Err(SnapshotError::Count { expected, found });
        }
        Ok(archive)
    }
}
