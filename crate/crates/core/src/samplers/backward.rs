//! Backward simulation: ancestors of the evidence are drawn by inverting the
//! link matrices of already-assigned children, everything else is drawn
//! forward.
//!
//! The node ordering puts evidence first, then the remaining ancestors of the
//! evidence with children before parents, then the other nodes with parents
//! before children. Each unassigned ancestor is placed together with its
//! co-parents by sampling them jointly from
//! `kappa * P(x_child | assigned parents, unassigned parents)`.

use std::collections::BTreeSet;

use rand::Rng;

use super::{draw_index, factor_product, SamplerError, WeightedTrial};
use crate::network::{ordered_subset, Network, NodeId};
use crate::trial::{Evidence, Trial};

/// Assignment under construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialTrial {
    states: Vec<usize>,
    assigned: Vec<bool>,
}

impl PartialTrial {
    pub fn new(len: usize) -> Self {
        Self {
            states: vec![0; len],
            assigned: vec![false; len],
        }
    }

    pub fn from_evidence(len: usize, evidence: &Evidence) -> Self {
        let mut p = Self::new(len);
        for (n, s) in evidence.iter() {
            p.assign(n, s);
        }
        p
    }

    pub fn get(&self, node: NodeId) -> Option<usize> {
        self.assigned[node.0].then_some(self.states[node.0])
    }

    pub fn is_assigned(&self, node: NodeId) -> bool {
        self.assigned[node.0]
    }

    pub fn assign(&mut self, node: NodeId, state: usize) {
        self.states[node.0] = state;
        self.assigned[node.0] = true;
    }

    pub fn is_complete(&self) -> bool {
        self.assigned.iter().all(|&a| a)
    }

    /// The full trial, once every node is assigned.
    pub fn into_trial(self) -> Option<Trial> {
        self.is_complete().then(|| Trial::new(self.states))
    }
}

/// Node ordering and inversion choices for one evidence set.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardPlan {
    evidence: Evidence,
    ordering: Vec<NodeId>,
    position: Vec<usize>,
    in_ancestors: Vec<bool>,
    inversion_child: Vec<Option<NodeId>>,
}

impl BackwardPlan {
    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn ordering(&self) -> &[NodeId] {
        &self.ordering
    }

    pub fn position(&self, node: NodeId) -> usize {
        self.position[node.0]
    }

    /// `A(E)`: the evidence nodes and all of their ancestors.
    pub fn ancestor_set(&self) -> BTreeSet<NodeId> {
        (0..self.in_ancestors.len())
            .filter(|&n| self.in_ancestors[n])
            .map(NodeId)
            .collect()
    }

    pub fn is_ancestor(&self, node: NodeId) -> bool {
        self.in_ancestors[node.0]
    }

    /// Child whose link matrix is inverted to place `node`; only set for
    /// unobserved ancestors of the evidence.
    pub fn inversion_child(&self, node: NodeId) -> Option<NodeId> {
        self.inversion_child[node.0]
    }
}

pub fn backward_plan(net: &Network, evidence: &Evidence) -> Result<BackwardPlan, SamplerError> {
    if evidence.is_empty() {
        return Err(SamplerError::EmptyEvidence);
    }
    evidence.validate(net)?;
    let n = net.len();
    let ancestors = net.ancestors(evidence.nodes());

    let parents: Vec<Vec<NodeId>> = net.node_ids().map(|i| net.parents(i).to_vec()).collect();
    let children: Vec<Vec<NodeId>> = net.node_ids().map(|i| net.children(i).to_vec()).collect();
    let observed: Vec<bool> = (0..n).map(|i| evidence.contains(NodeId(i))).collect();
    let hidden_ancestors: Vec<bool> = (0..n)
        .map(|i| ancestors.contains(&NodeId(i)) && !observed[i])
        .collect();
    let rest: Vec<bool> = (0..n).map(|i| !ancestors.contains(&NodeId(i))).collect();

    // subgraphs of a DAG are acyclic, so these cannot fail
    let mut ordering = ordered_subset(&parents, &children, &observed, true).unwrap();
    ordering.extend(ordered_subset(&parents, &children, &hidden_ancestors, true).unwrap());
    ordering.extend(ordered_subset(&parents, &children, &rest, false).unwrap());

    let mut position = vec![0; n];
    for (i, node) in ordering.iter().enumerate() {
        position[node.0] = i;
    }

    let mut inversion_child = vec![None; n];
    for node in net.node_ids().filter(|i| hidden_ancestors[i.0]) {
        let child = net
            .children(node)
            .iter()
            .copied()
            .filter(|c| ancestors.contains(c))
            .min_by_key(|c| position[c.0])
            .filter(|c| position[c.0] < position[node.0])
            .ok_or_else(|| SamplerError::Planning(net.node(node).name.clone()))?;
        inversion_child[node.0] = Some(child);
    }

    Ok(BackwardPlan {
        evidence: evidence.clone(),
        ordering,
        position,
        in_ancestors: (0..n).map(|i| ancestors.contains(&NodeId(i))).collect(),
        inversion_child,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseDraw {
    /// Sampled states for the child's previously unassigned parents.
    pub assignment: Vec<(NodeId, usize)>,
    /// Normaliser with `1/kappa = sum over unassigned parent states of
    /// P(x_child | parents)`.
    pub kappa: f64,
    /// `kappa * P(x_child | parents)` at the sampled assignment.
    pub probability: f64,
}

/// Jointly samples the unassigned parents of `child` from the Bayes inverse of
/// its link matrix, conditioning on the child's state and its assigned parents.
pub fn bayes_inverse_sample<R: Rng + ?Sized>(
    net: &Network,
    child: NodeId,
    partial: &PartialTrial,
    rng: &mut R,
) -> Result<InverseDraw, SamplerError> {
    if !partial.is_assigned(child) {
        return Err(SamplerError::Unassigned(net.node(child).name.clone()));
    }
    let free: Vec<NodeId> = net
        .parents(child)
        .iter()
        .copied()
        .filter(|&p| !partial.is_assigned(p))
        .collect();
    let cards: Vec<usize> = free.iter().map(|&p| net.cardinality(p)).collect();
    let combos: usize = cards.iter().product();

    let mut scratch = partial.states.clone();
    let mut weights = Vec::with_capacity(combos);
    for combo in 0..combos {
        set_combo(&mut scratch, &free, &cards, combo);
        weights.push(net.factor(child, &scratch));
    }
    let inverse_total: f64 = weights.iter().sum();
    if inverse_total <= 0.0 {
        return Err(SamplerError::ZeroSupport(net.node(child).name.clone()));
    }
    let pick = draw_index(rng, &weights, inverse_total);
    set_combo(&mut scratch, &free, &cards, pick);
    let kappa = 1.0 / inverse_total;
    Ok(InverseDraw {
        assignment: free.iter().map(|&p| (p, scratch[p.0])).collect(),
        kappa,
        probability: kappa * weights[pick],
    })
}

// mixed radix, first free parent fastest
fn set_combo(states: &mut [usize], free: &[NodeId], cards: &[usize], mut combo: usize) {
    for (p, &c) in free.iter().zip(cards) {
        states[p.0] = combo % c;
        combo /= c;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackwardDraw {
    pub sample: WeightedTrial,
    /// The set `B` of children whose link matrices were inverted, in order.
    pub inverted: Vec<NodeId>,
}

/// One backward-simulated trial. The weight is the product of the ancestor
/// factors divided by the product of the inverse-sampling probabilities;
/// a zero-support inversion yields weight 0.
pub fn backward_sample<R: Rng + ?Sized>(net: &Network, plan: &BackwardPlan, rng: &mut R) -> BackwardDraw {
    let mut partial = PartialTrial::from_evidence(net.len(), &plan.evidence);
    let mut inverse_product = 1.0;
    let mut forward_product = 1.0;
    let mut inverted = Vec::new();
    let mut dead = false;

    for &node in &plan.ordering {
        if partial.is_assigned(node) {
            continue;
        }
        if plan.in_ancestors[node.0] {
            let child = plan.inversion_child[node.0].expect("plan covers every hidden ancestor");
            match bayes_inverse_sample(net, child, &partial, rng) {
                Ok(draw) => {
                    for &(p, s) in &draw.assignment {
                        partial.assign(p, s);
                    }
                    inverse_product *= draw.probability;
                    inverted.push(child);
                }
                Err(_) => {
                    dead = true;
                    for &p in net.parents(child) {
                        if !partial.is_assigned(p) {
                            partial.assign(p, 0);
                        }
                    }
                }
            }
        } else {
            let row = net.cpt(node).row(net.row_index(node, &partial.states));
            let s = draw_index(rng, row, 1.0);
            forward_product *= row[s];
            partial.assign(node, s);
        }
    }

    let states = partial.states;
    let (weight, sampling_probability) = if dead {
        (0.0, 0.0)
    } else {
        let numerator = factor_product(
            net,
            &states,
            (0..states.len()).map(NodeId).filter(|n| plan.in_ancestors[n.0]),
        );
        (numerator / inverse_product, inverse_product * forward_product)
    };
    BackwardDraw {
        sample: WeightedTrial {
            trial: Trial::new(states),
            weight,
            sampling_probability,
        },
        inverted,
    }
}
