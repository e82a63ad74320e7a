//! Random network generation and low-prior leaf evidence.
//!
//! Parents are always drawn from lower-indexed nodes, so node order is a
//! precedence order and every generated graph is acyclic.

use rand::distributions::{Open01, WeightedIndex};
use rand::prelude::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exact::{evidence_probability, prior_marginals, DEFAULT_BUDGET};
use crate::network::{Network, NetworkBuilder, NetworkError, NodeId};
use crate::samplers::logic_sampling_estimate;
use crate::trial::Evidence;

/// Cardinalities a generated node may take, matched with `cardinality_weights`.
pub const CARDINALITIES: [usize; 3] = [2, 3, 4];

/// Redraws allowed for a row that came out all zero before it turns uniform.
pub const ROW_REDRAWS: usize = 100;

/// Logic-sampling trials used for priors when exact enumeration is too big.
pub const PRIOR_SAMPLES: u64 = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct NetGenConfig {
    pub node_count: usize,
    pub max_parents: usize,
    pub cardinality_weights: [f64; 3],
    pub zero_cell_prob: f64,
    pub evidence_count: usize,
    pub seed: u64,
}

impl Default for NetGenConfig {
    fn default() -> Self {
        Self {
            node_count: 32,
            max_parents: 3,
            cardinality_weights: [0.5, 0.3, 0.2],
            zero_cell_prob: 0.5,
            evidence_count: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetGenError {
    #[error("invalid generator settings: {0}")]
    Config(String),
    #[error("network has {found} leaves, {needed} needed for evidence")]
    TooFewLeaves { found: usize, needed: usize },
    #[error("only {found} of {needed} leaf observations keep the evidence possible")]
    Unsatisfiable { found: usize, needed: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl NetGenConfig {
    pub fn validate(&self) -> Result<(), NetGenError> {
        let bad = |what: &str| Err(NetGenError::Config(what.to_string()));
        if self.node_count < 1 {
            return bad("node_count must be at least 1");
        }
        if self.max_parents >= self.node_count && self.max_parents > 0 {
            return bad("max_parents must be below node_count");
        }
        let w = &self.cardinality_weights;
        if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("cardinality_weights must be nonnegative and sum to 1");
        }
        if !(0.0..1.0).contains(&self.zero_cell_prob) {
            return bad("zero_cell_prob must lie in [0, 1)");
        }
        Ok(())
    }

    /// Generator stream for this configuration's seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Counts of link-matrix cells, as drawn and as stored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellStats {
    /// Every cell draw, including draws of rows later thrown away.
    pub drawn: u64,
    pub drawn_zero: u64,
    pub stored: u64,
    pub stored_zero: u64,
    pub redrawn_rows: u64,
    pub uniform_rows: u64,
}

pub fn generate<R: Rng + ?Sized>(config: &NetGenConfig, rng: &mut R) -> Result<Network, NetGenError> {
    generate_with_stats(config, rng).map(|(net, _)| net)
}

/// Generates from the configuration's own seed.
pub fn generate_seeded(config: &NetGenConfig) -> Result<Network, NetGenError> {
    generate(config, &mut config.rng())
}

pub fn generate_with_stats<R: Rng + ?Sized>(
    config: &NetGenConfig,
    rng: &mut R,
) -> Result<(Network, CellStats), NetGenError> {
    config.validate()?;
    let cards = WeightedIndex::new(config.cardinality_weights)
        .map_err(|e| NetGenError::Config(e.to_string()))?;
    let width = config.node_count.saturating_sub(1).to_string().len();
    let mut b = NetworkBuilder::new(format!("random-{}", config.seed));
    let mut stats = CellStats::default();

    for i in 0..config.node_count {
        let card = CARDINALITIES[cards.sample(rng)];
        let node = b.add_node(format!("N{i:0width$}"), card);
        let k = rng.gen_range(0..=config.max_parents).min(i);
        let mut parents: Vec<NodeId> = index::sample(rng, i, k).into_iter().map(NodeId).collect();
        parents.sort_unstable();
        b.set_parents(node, &parents);

        let rows: usize = parents.iter().map(|&p| b.node(p).cardinality).product();
        let mut probs = Vec::with_capacity(rows * card);
        for _ in 0..rows {
            probs.extend(draw_row(card, config.zero_cell_prob, rng, &mut stats));
        }
        b.set_cpt(node, probs);
    }
    Ok((b.build()?, stats))
}

fn draw_row<R: Rng + ?Sized>(card: usize, zero_prob: f64, rng: &mut R, stats: &mut CellStats) -> Vec<f64> {
    let mut row = vec![0.0; card];
    for attempt in 0..=ROW_REDRAWS {
        if attempt > 0 {
            stats.redrawn_rows += 1;
        }
        for cell in row.iter_mut() {
            *cell = if rng.gen::<f64>() < zero_prob {
                0.0
            } else {
                rng.sample(Open01)
            };
        }
        stats.drawn += card as u64;
        stats.drawn_zero += row.iter().filter(|&&v| v == 0.0).count() as u64;
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
            stats.stored += card as u64;
            stats.stored_zero += row.iter().filter(|&&v| v == 0.0).count() as u64;
            return row;
        }
    }
    stats.uniform_rows += 1;
    stats.stored += card as u64;
    vec![1.0 / card as f64; card]
}

/// Expected fraction of stored zero cells in a `card`-state row when rows
/// that come out all zero are redrawn.
pub fn expected_stored_zero_fraction(card: usize, zero_prob: f64) -> f64 {
    let all = zero_prob.powi(card as i32);
    (zero_prob - all) / (1.0 - all)
}

/// Observes `count` leaves, each at a state of small prior probability.
///
/// Leaves are ranked by their least likely state with positive prior. They
/// are added in that order, each at the least likely state that keeps the
/// combined evidence possible; a leaf with no such state is passed over.
/// Priors and the possibility check are exact when the network is small
/// enough to enumerate; otherwise priors come from logic sampling and only
/// states seen in the sample are used.
pub fn select_low_prior_evidence<R: Rng + ?Sized>(
    net: &Network,
    count: usize,
    rng: &mut R,
) -> Result<Evidence, NetGenError> {
    let leaves = net.leaves();
    if leaves.len() < count {
        return Err(NetGenError::TooFewLeaves {
            found: leaves.len(),
            needed: count,
        });
    }
    let enumerable = net.joint_state_count() <= DEFAULT_BUDGET;
    let priors = if enumerable {
        prior_marginals(net, DEFAULT_BUDGET).expect("within budget")
    } else {
        logic_sampling_estimate(net, &Evidence::new(), PRIOR_SAMPLES, rng).beliefs
    };

    let mut ranked: Vec<(NodeId, Vec<(usize, f64)>)> = leaves
        .into_iter()
        .map(|leaf| {
            let mut states: Vec<(usize, f64)> = priors
                .node(leaf)
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, p)| p > 0.0)
                .collect();
            states.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            (leaf, states)
        })
        .filter(|(_, states)| !states.is_empty())
        .collect();
    ranked.sort_by(|a, b| a.1[0].1.total_cmp(&b.1[0].1).then(a.0.cmp(&b.0)));

    let mut evidence = Evidence::new();
    for (leaf, states) in ranked {
        if evidence.len() == count {
            break;
        }
        for (state, _) in states {
            let candidate = evidence.clone().with(leaf, state);
            let possible = !enumerable
                || evidence_probability(net, &candidate, DEFAULT_BUDGET).expect("within budget") > 0.0;
            if possible {
                evidence = candidate;
                break;
            }
        }
    }
    if evidence.len() < count {
        return Err(NetGenError::Unsatisfiable {
            found: evidence.len(),
            needed: count,
        });
    }
    Ok(evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::write_network;

    #[test]
    fn single_node_and_disconnected() {
        let one = NetGenConfig {
            node_count: 1,
            max_parents: 0,
            ..NetGenConfig::default()
        };
        let net = generate_seeded(&one).unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.parents(NodeId(0)).is_empty());

        let flat = NetGenConfig {
            max_parents: 0,
            ..NetGenConfig::default()
        };
        let net = generate_seeded(&flat).unwrap();
        assert!(net.node_ids().all(|n| net.parents(n).is_empty()));
    }

    #[test]
    fn default_networks_are_valid() {
        for seed in 0..100 {
            let cfg = NetGenConfig {
                seed,
                ..NetGenConfig::default()
            };
            let net = generate_seeded(&cfg).unwrap();
            assert_eq!(net.len(), 32);
            for n in net.node_ids() {
                assert!(net.parents(n).len() <= 3);
                assert!(net.parents(n).iter().all(|p| p.0 < n.0));
                assert!(CARDINALITIES.contains(&net.cardinality(n)));
            }
        }
    }

    #[test]
    fn same_seed_same_file() {
        let cfg = NetGenConfig {
            seed: 17,
            ..NetGenConfig::default()
        };
        let a = write_network(&generate_seeded(&cfg).unwrap());
        let b = write_network(&generate_seeded(&cfg).unwrap());
        assert_eq!(a, b);
        let other = NetGenConfig { seed: 18, ..cfg };
        assert_ne!(a, write_network(&generate_seeded(&other).unwrap()));
    }

    #[test]
    fn config_validation() {
        let bad = NetGenConfig {
            zero_cell_prob: 1.0,
            ..NetGenConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = NetGenConfig {
            cardinality_weights: [0.5, 0.5, 0.5],
            ..NetGenConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = NetGenConfig {
            node_count: 3,
            max_parents: 3,
            ..NetGenConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_cells_track_the_configured_rate() {
        let mut stats = CellStats::default();
        let mut stored_expected = 0.0;
        let mut cells = 0u64;
        for seed in 0..20 {
            let cfg = NetGenConfig {
                seed,
                ..NetGenConfig::default()
            };
            let (net, s) = generate_with_stats(&cfg, &mut cfg.rng()).unwrap();
            stats.drawn += s.drawn;
            stats.drawn_zero += s.drawn_zero;
            stats.stored += s.stored;
            stats.stored_zero += s.stored_zero;
            for n in net.node_ids() {
                let c = net.cardinality(n);
                let size = (net.cpt(n).rows() * c) as u64;
                cells += size;
                stored_expected += size as f64 * expected_stored_zero_fraction(c, 0.5);
            }
        }
        assert!(stats.drawn >= 10_000);
        assert_eq!(stats.stored, cells);
        let drawn_rate = stats.drawn_zero as f64 / stats.drawn as f64;
        assert!((drawn_rate - 0.5).abs() < 0.02, "{drawn_rate}");
        let stored_rate = stats.stored_zero as f64 / stats.stored as f64;
        assert!((stored_rate - stored_expected / cells as f64).abs() < 0.02);
    }

    fn two_leaves() -> Network {
        let mut b = NetworkBuilder::new("leaves");
        let r = b.add_node("R", 2);
        let x = b.add_node("X", 2);
        let y = b.add_node("Y", 2);
        b.set_parents(x, &[r]).set_parents(y, &[r]);
        b.set_cpt(r, vec![0.5, 0.5]);
        b.set_cpt(x, vec![0.9, 0.1, 0.9, 0.1]);
        b.set_cpt(y, vec![0.6, 0.4, 0.6, 0.4]);
        b.build().unwrap()
    }

    #[test]
    fn picks_least_likely_leaf_state() {
        let net = two_leaves();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ev = select_low_prior_evidence(&net, 1, &mut rng).unwrap();
        assert_eq!(ev, Evidence::new().with(NodeId(1), 1));
        let ev = select_low_prior_evidence(&net, 2, &mut rng).unwrap();
        assert_eq!(ev, Evidence::new().with(NodeId(1), 1).with(NodeId(2), 1));
        assert_eq!(
            select_low_prior_evidence(&net, 3, &mut rng).unwrap_err(),
            NetGenError::TooFewLeaves { found: 2, needed: 3 }
        );
    }

    #[test]
    fn skips_states_that_make_evidence_impossible() {
        // Y=0 needs R=0 while X=1 needs R=1
        let mut b = NetworkBuilder::new("clash");
        let r = b.add_node("R", 2);
        let x = b.add_node("X", 2);
        let y = b.add_node("Y", 2);
        b.set_parents(x, &[r]).set_parents(y, &[r]);
        b.set_cpt(r, vec![0.6, 0.4]);
        b.set_cpt(x, vec![1.0, 0.0, 0.0, 1.0]);
        b.set_cpt(y, vec![0.1, 0.9, 0.0, 1.0]);
        let net = b.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ev = select_low_prior_evidence(&net, 2, &mut rng).unwrap();
        assert_eq!(ev, Evidence::new().with(y, 0).with(x, 0));
        assert!(evidence_probability(&net, &ev, DEFAULT_BUDGET).unwrap() > 0.0);
    }

    #[test]
    fn generated_evidence_is_possible() {
        for seed in 0..10 {
            let cfg = NetGenConfig {
                node_count: 10,
                seed,
                ..NetGenConfig::default()
            };
            let net = generate_seeded(&cfg).unwrap();
            let mut rng = cfg.rng();
            match select_low_prior_evidence(&net, 4, &mut rng) {
                Ok(ev) => {
                    assert_eq!(ev.len(), 4);
                    assert!(evidence_probability(&net, &ev, DEFAULT_BUDGET).unwrap() > 0.0);
                }
                Err(NetGenError::TooFewLeaves { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}
