//! Brute-force enumeration: the ground truth every estimator is scored against.

use thiserror::Error;

use crate::belief::BeliefTable;
use crate::network::Network;
use crate::trial::{Evidence, EvidenceError, Odometer};

/// Default cap on the number of joint states an exact solve may touch.
pub const DEFAULT_BUDGET: u128 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("exact enumeration needs {required} joint states, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub posterior: BeliefTable,
    pub evidence_probability: f64,
    pub enumerated_trials: u64,
}

/// Checks that `net` fits in `budget` joint states.
pub fn check_budget(net: &Network, budget: u128) -> Result<(), ExactError> {
    let required = net.joint_state_count();
    if required > budget {
        return Err(ExactError::BudgetExceeded { required, budget });
    }
    Ok(())
}

/// `P(X_n | evidence)` for every node, by summing the joint over every
/// conforming trial. Impossible evidence yields an undefined posterior.
pub fn exact_posterior(
    net: &Network,
    evidence: &Evidence,
    budget: u128,
) -> Result<ExactSolution, ExactError> {
    check_budget(net, budget)?;
    evidence.validate(net)?;

    let mut sums: Vec<Vec<f64>> = net.nodes().iter().map(|n| vec![0.0; n.cardinality]).collect();
    let mut mass = 0.0;
    let mut count = 0u64;
    Odometer::new(net, evidence).for_each(|states| {
        count += 1;
        let p = net.joint_unchecked(states);
        if p > 0.0 {
            mass += p;
            for (row, &s) in sums.iter_mut().zip(states) {
                row[s] += p;
            }
        }
    });

    Ok(ExactSolution {
        posterior: BeliefTable::from_partial_sums(&sums, mass),
        evidence_probability: mass,
        enumerated_trials: count,
    })
}

pub fn prior_marginals(net: &Network, budget: u128) -> Result<BeliefTable, ExactError> {
    Ok(exact_posterior(net, &Evidence::new(), budget)?.posterior)
}

/// `P(evidence)` alone.
pub fn evidence_probability(
    net: &Network,
    evidence: &Evidence,
    budget: u128,
) -> Result<f64, ExactError> {
    check_budget(net, budget)?;
    evidence.validate(net)?;
    let mut mass = 0.0;
    Odometer::new(net, evidence).for_each(|states| mass += net.joint_unchecked(states));
    Ok(mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkBuilder, NodeId};
    use crate::trial::conforming_trials;

    #[test]
    fn single_node_prior() {
        let mut b = NetworkBuilder::new("one");
        let a = b.add_node("A", 2);
        b.set_cpt(a, vec![0.3, 0.7]);
        let net = b.build().unwrap();
        let sol = exact_posterior(&net, &Evidence::new(), DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.evidence_probability, 1.0);
        assert_eq!(sol.posterior.node(a), &[0.3, 0.7]);
        assert_eq!(sol.enumerated_trials, 2);
    }

    fn two_node() -> Network {
        let mut b = NetworkBuilder::new("ab");
        let a = b.add_node("A", 2);
        let c = b.add_node("B", 2);
        b.set_parents(c, &[a]);
        b.set_cpt(a, vec![0.3, 0.7]);
        b.set_cpt(c, vec![0.9, 0.1, 0.4, 0.6]);
        b.build().unwrap()
    }

    #[test]
    fn bayes_by_hand() {
        let net = two_node();
        let ev = Evidence::new().with(NodeId(1), 1);
        let sol = exact_posterior(&net, &ev, DEFAULT_BUDGET).unwrap();
        // P(b1) = 0.3*0.1 + 0.7*0.6 = 0.45
        let pe = 0.3 * 0.1 + 0.7 * 0.6;
        assert!((sol.evidence_probability - pe).abs() < 1e-15);
        let post = sol.posterior.node(NodeId(0));
        assert!((post[0] - 0.03 / pe).abs() < 1e-12);
        assert!((post[1] - 0.42 / pe).abs() < 1e-12);
        assert_eq!(sol.posterior.node(NodeId(1)), &[0.0, 1.0]);
    }

    #[test]
    fn impossible_evidence_is_undefined() {
        let mut b = NetworkBuilder::new("z");
        let a = b.add_node("A", 2);
        let c = b.add_node("B", 2);
        b.set_parents(c, &[a]);
        b.set_cpt(a, vec![1.0, 0.0]);
        b.set_cpt(c, vec![1.0, 0.0, 0.5, 0.5]);
        let net = b.build().unwrap();
        let sol = exact_posterior(&net, &Evidence::new().with(c, 1), DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.evidence_probability, 0.0);
        assert!(!sol.posterior.is_defined());
    }

    #[test]
    fn budget_is_enforced() {
        let net = two_node();
        assert_eq!(
            exact_posterior(&net, &Evidence::new(), 3),
            Err(ExactError::BudgetExceeded {
                required: 4,
                budget: 3
            })
        );
    }

    #[test]
    fn evidence_mass_matches_conforming_sum() {
        let net = two_node();
        let ev = Evidence::new().with(NodeId(0), 1);
        let direct: f64 = conforming_trials(&net, &ev)
            .iter()
            .map(|t| net.joint_probability(t).unwrap())
            .sum();
        let pe = evidence_probability(&net, &ev, DEFAULT_BUDGET).unwrap();
        assert!((pe - direct).abs() < 1e-15);
        assert!((pe - 0.7).abs() < 1e-15);
    }
}
