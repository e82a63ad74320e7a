//! Trial generators and the weighted frequency estimator.
//!
//! Every generator returns a [`WeightedTrial`] carrying both the likelihood
//! weight and the probability the generator assigned to the trial, so that
//! `weight * sampling_probability == joint probability` can be checked per
//! sample.

mod backward;
mod tally;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::belief::BeliefTable;
use crate::network::{Network, NodeId};
use crate::trial::{Evidence, EvidenceError, Trial};

pub use backward::{
    backward_plan, backward_sample, bayes_inverse_sample, BackwardDraw, BackwardPlan,
    InverseDraw, PartialTrial,
};
pub use tally::{frequency_estimate, FrequencyTally};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("backward sampling needs at least one observed node; use forward sampling")]
    EmptyEvidence,
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error("observed state of `{0}` is unreachable from its assigned parents")]
    ZeroSupport(String),
    #[error("no earlier child in the ancestor set can place node `{0}`")]
    Planning(String),
    #[error("node `{0}` must be assigned before inverting its link matrix")]
    Unassigned(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTrial {
    pub trial: Trial,
    /// Likelihood weight `z`; zero for trials that cannot conform.
    pub weight: f64,
    /// Probability of this trial under the generator's sampling distribution.
    pub sampling_probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplingMethod {
    Logic,
    Forward,
    Backward,
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMethod::Logic => "logic",
            SamplingMethod::Forward => "forward",
            SamplingMethod::Backward => "backward",
        })
    }
}

impl FromStr for SamplingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logic" => Ok(SamplingMethod::Logic),
            "forward" | "fwd" => Ok(SamplingMethod::Forward),
            "backward" | "bwd" => Ok(SamplingMethod::Backward),
            other => Err(format!("unknown sampling method `{other}`")),
        }
    }
}

/// Index drawn with probability proportional to `weights`; `total` must be
/// their positive sum.
pub(crate) fn draw_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return i;
            }
            u -= w;
            last = i;
        }
    }
    last
}

fn draw_from_row<R: Rng + ?Sized>(rng: &mut R, row: &[f64]) -> usize {
    draw_index(rng, row, 1.0)
}

/// One trial from the prior joint, sampled in precedence order.
pub fn logic_sample<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Trial {
    let mut states = vec![0; net.len()];
    for &n in net.precedence_order() {
        let row = net.cpt(n).row(net.row_index(n, &states));
        states[n.0] = draw_from_row(rng, row);
    }
    Trial::new(states)
}

fn logic_weighted<R: Rng + ?Sized>(net: &Network, evidence: &Evidence, rng: &mut R) -> WeightedTrial {
    let trial = logic_sample(net, rng);
    let sampling_probability = net.joint_unchecked(trial.states());
    let weight = if trial.conforms(evidence) { 1.0 } else { 0.0 };
    WeightedTrial {
        trial,
        weight,
        sampling_probability,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogicEstimate {
    pub beliefs: BeliefTable,
    pub accepted: u64,
    pub trials: u64,
}

/// Rejection estimate: relative frequencies among the conforming samples.
pub fn logic_sampling_estimate<R: Rng + ?Sized>(
    net: &Network,
    evidence: &Evidence,
    trials: u64,
    rng: &mut R,
) -> LogicEstimate {
    let mut tally = FrequencyTally::new(net);
    for _ in 0..trials {
        tally.record(&logic_weighted(net, evidence, rng));
    }
    LogicEstimate {
        beliefs: tally.estimate(),
        accepted: tally.positive_trials(),
        trials,
    }
}

/// Likelihood weighting: observed nodes are clamped and contribute their
/// link-matrix factor to the weight; the rest are sampled from their rows.
pub fn forward_sample<R: Rng + ?Sized>(
    net: &Network,
    evidence: &Evidence,
    rng: &mut R,
) -> WeightedTrial {
    let mut states = vec![0; net.len()];
    let mut weight = 1.0;
    let mut sampling_probability = 1.0;
    for &n in net.precedence_order() {
        let row = net.cpt(n).row(net.row_index(n, &states));
        match evidence.get(n) {
            Some(s) => {
                states[n.0] = s;
                weight *= row[s];
            }
            None => {
                let s = draw_from_row(rng, row);
                states[n.0] = s;
                sampling_probability *= row[s];
            }
        }
    }
    WeightedTrial {
        trial: Trial::new(states),
        weight,
        sampling_probability,
    }
}

/// A configured trial generator for one network and evidence set.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    net: &'a Network,
    evidence: Evidence,
    method: SamplingMethod,
    plan: Option<BackwardPlan>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        net: &'a Network,
        evidence: &Evidence,
        method: SamplingMethod,
    ) -> Result<Self, SamplerError> {
        evidence.validate(net)?;
        let plan = match method {
            SamplingMethod::Backward => Some(backward_plan(net, evidence)?),
            _ => None,
        };
        Ok(Self {
            net,
            evidence: evidence.clone(),
            method,
            plan,
        })
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightedTrial {
        match self.method {
            SamplingMethod::Logic => logic_weighted(self.net, &self.evidence, rng),
            SamplingMethod::Forward => forward_sample(self.net, &self.evidence, rng),
            SamplingMethod::Backward => {
                let plan = self.plan.as_ref().expect("backward sampler has a plan");
                backward_sample(self.net, plan, rng).sample
            }
        }
    }
}

/// Product of the link-matrix factors of `nodes` at `states`.
pub(crate) fn factor_product(net: &Network, states: &[usize], nodes: impl Iterator<Item = NodeId>) -> f64 {
    nodes.map(|n| net.factor(n, states)).product()
}
