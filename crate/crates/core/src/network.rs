//! Discrete Bayesian networks: nodes, link matrices and graph queries.
//!
//! A [`Network`] is immutable once built. Link matrices are stored row-major:
//! one row per parent-state combination, one column per state of the node.
//! Rows are indexed mixed-radix over the parents in their declared order,
//! with the last declared parent varying fastest.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::trial::{Trial, TrialError, TrialLayout};

/// Tolerance on the sum of each link-matrix row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Dense handle into a network's node list.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network has no nodes")]
    Empty,
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("node `{name}` has {cardinality} states; at least 2 are required")]
    Cardinality { name: String, cardinality: usize },
    #[error("unknown node index {0}")]
    UnknownNode(usize),
    #[error("node `{0}` lists itself as a parent")]
    SelfParent(String),
    #[error("node `{node}` lists parent `{parent}` more than once")]
    DuplicateParent { node: String, parent: String },
    #[error("parent relation has a cycle through `{0}`")]
    Cycle(String),
    #[error("node `{0}` has no link matrix")]
    MissingCpt(String),
    #[error("link matrix of `{node}` has {found} entries, expected {expected}")]
    CptShape {
        node: String,
        expected: usize,
        found: usize,
    },
    #[error("link matrix of `{node}` has probability {value} outside [0, 1] in row {row}")]
    Probability { node: String, row: usize, value: f64 },
    #[error("row {row} of the link matrix of `{node}` is all zero")]
    ZeroRow { node: String, row: usize },
    #[error("row {row} of the link matrix of `{node}` sums to {sum}")]
    RowSum { node: String, row: usize, sum: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub cardinality: usize,
}

/// Link matrix `P(node | parents)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    cardinality: usize,
    probs: Vec<f64>,
}

impl Cpt {
    pub fn rows(&self) -> usize {
        self.probs.len() / self.cardinality
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.probs[row * self.cardinality..(row + 1) * self.cardinality]
    }

    #[inline]
    pub fn prob(&self, row: usize, state: usize) -> f64 {
        self.probs[row * self.cardinality + state]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    name: String,
    nodes: Vec<Node>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    // per node, per declared parent: multiplier into the row index
    strides: Vec<Vec<usize>>,
    cpts: Vec<Cpt>,
    precedence: Vec<NodeId>,
    by_name: HashMap<String, NodeId>,
    layout: TrialLayout,
}

impl Network {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn cardinality(&self, id: NodeId) -> usize {
        self.nodes[id.0].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.cardinality).collect()
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id.0]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    pub fn cpt(&self, id: NodeId) -> &Cpt {
        &self.cpts[id.0]
    }

    /// Nodes without children.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.node_ids()
            .filter(|&n| self.children[n.0].is_empty())
            .collect()
    }

    /// Topological order with ties broken by ascending node index.
    pub fn precedence_order(&self) -> &[NodeId] {
        &self.precedence
    }

    pub fn layout(&self) -> &TrialLayout {
        &self.layout
    }

    /// Number of joint states, saturating at `u128::MAX`.
    pub fn joint_state_count(&self) -> u128 {
        self.nodes
            .iter()
            .fold(1u128, |acc, n| acc.saturating_mul(n.cardinality as u128))
    }

    /// Row of `node`'s link matrix selected by the parent states in `states`.
    #[inline]
    pub fn row_index(&self, node: NodeId, states: &[usize]) -> usize {
        self.parents[node.0]
            .iter()
            .zip(&self.strides[node.0])
            .map(|(p, stride)| states[p.0] * stride)
            .sum()
    }

    /// `P(states[node] | parent states)`.
    #[inline]
    pub fn factor(&self, node: NodeId, states: &[usize]) -> f64 {
        self.cpts[node.0].prob(self.row_index(node, states), states[node.0])
    }

    /// Product of the link matrices at a full assignment.
    pub fn joint_probability(&self, trial: &Trial) -> Result<f64, TrialError> {
        trial.validate(self)?;
        Ok(self.joint_unchecked(trial.states()))
    }

    /// Natural log of the joint probability; `-inf` when any factor is zero.
    pub fn log_joint_probability(&self, trial: &Trial) -> Result<f64, TrialError> {
        trial.validate(self)?;
        Ok(self
            .node_ids()
            .map(|n| self.factor(n, trial.states()).ln())
            .sum())
    }

    pub(crate) fn joint_unchecked(&self, states: &[usize]) -> f64 {
        let mut p = 1.0;
        for n in 0..self.nodes.len() {
            p *= self.factor(NodeId(n), states);
            if p == 0.0 {
                return 0.0;
            }
        }
        p
    }

    /// Parents, children and the children's other parents; excludes `node`.
    pub fn markov_blanket(&self, node: NodeId) -> BTreeSet<NodeId> {
        let mut blanket: BTreeSet<NodeId> = self.parents[node.0].iter().copied().collect();
        for &child in &self.children[node.0] {
            blanket.insert(child);
            blanket.extend(self.parents[child.0].iter().copied());
        }
        blanket.remove(&node);
        blanket
    }

    /// `M^k(center)`: the blanket-plus-center map applied `radius` times,
    /// where the map on a set is the union over its members.
    pub fn markov_neighborhood(&self, center: NodeId, radius: usize) -> BTreeSet<NodeId> {
        let mut region = BTreeSet::from([center]);
        let mut frontier = vec![center];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &member in &frontier {
                for n in self.markov_blanket(member) {
                    if region.insert(n) {
                        next.push(n);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        region
    }

    /// Seeds together with all of their ancestors.
    pub fn ancestors(&self, seeds: impl IntoIterator<Item = NodeId>) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<NodeId> = seeds.into_iter().collect();
        while let Some(n) = stack.pop() {
            if out.insert(n) {
                stack.extend(self.parents[n.0].iter().copied());
            }
        }
        out
    }
}

/// Kahn's algorithm restricted to `members`, smallest index first among ready
/// nodes. With `reversed` the arcs are followed child-to-parent, so children
/// come before their parents.
pub(crate) fn ordered_subset(
    parents: &[Vec<NodeId>],
    children: &[Vec<NodeId>],
    members: &[bool],
    reversed: bool,
) -> Result<Vec<NodeId>, NodeId> {
    let (incoming, outgoing) = if reversed {
        (children, parents)
    } else {
        (parents, children)
    };
    let mut pending: Vec<usize> = (0..members.len())
        .map(|n| {
            if members[n] {
                incoming[n].iter().filter(|p| members[p.0]).count()
            } else {
                0
            }
        })
        .collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..members.len())
        .filter(|&n| members[n] && pending[n] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(members.len());
    while let Some(Reverse(n)) = ready.pop() {
        order.push(NodeId(n));
        for &m in &outgoing[n] {
            if members[m.0] {
                pending[m.0] -= 1;
                if pending[m.0] == 0 {
                    ready.push(Reverse(m.0));
                }
            }
        }
    }
    let expected = members.iter().filter(|&&m| m).count();
    if order.len() != expected {
        let stuck = (0..members.len())
            .find(|&n| members[n] && pending[n] > 0)
            .unwrap_or(0);
        return Err(NodeId(stuck));
    }
    Ok(order)
}

/// Incremental constructor for [`Network`]; everything is checked in
/// [`NetworkBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    name: String,
    nodes: Vec<Node>,
    parents: Vec<Vec<NodeId>>,
    cpts: Vec<Option<Vec<f64>>>,
}

impl NetworkBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>, cardinality: usize) -> NodeId {
        self.nodes.push(Node {
            name: name.into(),
            cardinality,
        });
        self.parents.push(Vec::new());
        self.cpts.push(None);
        NodeId(self.nodes.len() - 1)
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id.0]
    }

    pub fn set_parents(&mut self, node: NodeId, parents: &[NodeId]) -> &mut Self {
        self.parents[node.0] = parents.to_vec();
        self
    }

    pub fn set_cpt(&mut self, node: NodeId, probs: Vec<f64>) -> &mut Self {
        self.cpts[node.0] = Some(probs);
        self
    }

    /// Number of link-matrix rows `node` needs under its current parents.
    /// Unknown parents count as one state; `build` reports them.
    pub fn row_count(&self, node: NodeId) -> usize {
        self.parents[node.0]
            .iter()
            .map(|p| self.nodes.get(p.0).map_or(1, |n| n.cardinality))
            .product()
    }

    pub fn build(self) -> Result<Network, NetworkError> {
        let NetworkBuilder {
            name,
            nodes,
            parents,
            cpts,
        } = self;
        let n = nodes.len();
        if n == 0 {
            return Err(NetworkError::Empty);
        }

        let mut by_name = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if node.cardinality < 2 {
                return Err(NetworkError::Cardinality {
                    name: node.name.clone(),
                    cardinality: node.cardinality,
                });
            }
            if by_name.insert(node.name.clone(), NodeId(i)).is_some() {
                return Err(NetworkError::DuplicateName(node.name.clone()));
            }
        }

        let mut children = vec![Vec::new(); n];
        for (i, ps) in parents.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &p in ps {
                if p.0 >= n {
                    return Err(NetworkError::UnknownNode(p.0));
                }
                if p.0 == i {
                    return Err(NetworkError::SelfParent(nodes[i].name.clone()));
                }
                if !seen.insert(p) {
                    return Err(NetworkError::DuplicateParent {
                        node: nodes[i].name.clone(),
                        parent: nodes[p.0].name.clone(),
                    });
                }
                children[p.0].push(NodeId(i));
            }
        }

        let precedence = ordered_subset(&parents, &children, &vec![true; n], false)
            .map_err(|stuck| NetworkError::Cycle(nodes[stuck.0].name.clone()))?;

        let mut strides = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        for (i, cpt) in cpts.into_iter().enumerate() {
            let node = &nodes[i];
            let mut node_strides = vec![0; parents[i].len()];
            let mut rows = 1;
            for (slot, p) in parents[i].iter().enumerate().rev() {
                node_strides[slot] = rows;
                rows *= nodes[p.0].cardinality;
            }
            let probs = cpt.ok_or_else(|| NetworkError::MissingCpt(node.name.clone()))?;
            let expected = rows * node.cardinality;
            if probs.len() != expected {
                return Err(NetworkError::CptShape {
                    node: node.name.clone(),
                    expected,
                    found: probs.len(),
                });
            }
            for (row, chunk) in probs.chunks(node.cardinality).enumerate() {
                if let Some(&value) = chunk
                    .iter()
                    .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
                {
                    return Err(NetworkError::Probability {
                        node: node.name.clone(),
                        row,
                        value,
                    });
                }
                let sum: f64 = chunk.iter().sum();
                if sum == 0.0 {
                    return Err(NetworkError::ZeroRow {
                        node: node.name.clone(),
                        row,
                    });
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(NetworkError::RowSum {
                        node: node.name.clone(),
                        row,
                        sum,
                    });
                }
            }
            strides.push(node_strides);
            tables.push(Cpt {
                cardinality: node.cardinality,
                probs,
            });
        }

        let layout = TrialLayout::new(nodes.iter().map(|n| n.cardinality));
        Ok(Network {
            name,
            nodes,
            parents,
            children,
            strides,
            cpts: tables,
            precedence,
            by_name,
            layout,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chain() -> Network {
        // declared C, B, A so that index order differs from precedence
        let mut b = NetworkBuilder::new("chain");
        let c = b.add_node("C", 2);
        let bb = b.add_node("B", 2);
        let a = b.add_node("A", 2);
        b.set_parents(bb, &[a]).set_parents(c, &[bb]);
        b.set_cpt(a, vec![0.6, 0.4]);
        b.set_cpt(bb, vec![0.7, 0.3, 0.2, 0.8]);
        b.set_cpt(c, vec![0.9, 0.1, 0.5, 0.5]);
        b.build().unwrap()
    }

    fn diamond() -> Network {
        let mut b = NetworkBuilder::new("diamond");
        let a = b.add_node("A", 2);
        let bb = b.add_node("B", 2);
        let c = b.add_node("C", 2);
        let d = b.add_node("D", 2);
        b.set_parents(bb, &[a]).set_parents(c, &[a]).set_parents(d, &[bb, c]);
        b.set_cpt(a, vec![0.5, 0.5]);
        b.set_cpt(bb, vec![0.5, 0.5, 0.5, 0.5]);
        b.set_cpt(c, vec![0.5, 0.5, 0.5, 0.5]);
        b.set_cpt(d, vec![0.5; 8]);
        b.build().unwrap()
    }

    #[test]
    fn single_root_joint() {
        let mut b = NetworkBuilder::new("one");
        let a = b.add_node("A", 2);
        b.set_cpt(a, vec![0.3, 0.7]);
        let net = b.build().unwrap();
        assert_eq!(net.joint_probability(&Trial::new(vec![0])).unwrap(), 0.3);
    }

    #[test]
    fn chain_joint_is_hand_product() {
        let net = chain();
        // indices: C=0, B=1, A=2; trial (a1, b0, c1)
        let trial = Trial::new(vec![1, 0, 1]);
        let expected = 0.4 * 0.2 * 0.1;
        assert!((net.joint_probability(&trial).unwrap() - expected).abs() < 1e-15);
        let log = net.log_joint_probability(&trial).unwrap();
        assert!((log.exp() - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_factor_annihilates() {
        let mut b = NetworkBuilder::new("z");
        let a = b.add_node("A", 2);
        let c = b.add_node("B", 2);
        b.set_parents(c, &[a]);
        b.set_cpt(a, vec![0.5, 0.5]);
        b.set_cpt(c, vec![1.0, 0.0, 0.5, 0.5]);
        let net = b.build().unwrap();
        assert_eq!(net.joint_probability(&Trial::new(vec![0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn joint_rejects_wrong_dimension() {
        let net = chain();
        assert!(net.joint_probability(&Trial::new(vec![0, 0])).is_err());
        assert!(net.joint_probability(&Trial::new(vec![0, 0, 2])).is_err());
    }

    #[test]
    fn precedence_without_arcs_is_identity() {
        let mut b = NetworkBuilder::new("flat");
        for i in 0..5 {
            let n = b.add_node(format!("X{i}"), 2);
            b.set_cpt(n, vec![0.5, 0.5]);
        }
        let net = b.build().unwrap();
        let order: Vec<usize> = net.precedence_order().iter().map(|n| n.0).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn precedence_of_reversed_chain() {
        let net = chain();
        let names: Vec<&str> = net
            .precedence_order()
            .iter()
            .map(|&n| net.node(n).name.as_str())
            .collect();
        assert_eq!(names, ["A", "B", "C"]);
    }

    #[test]
    fn precedence_of_diamond() {
        let net = diamond();
        let order = net.precedence_order();
        assert_eq!(order, &[NodeId(0), NodeId(1), NodeId(2), NodeId(3)]);
        let pos = |n: NodeId| order.iter().position(|&m| m == n).unwrap();
        for n in net.node_ids() {
            for &p in net.parents(n) {
                assert!(pos(p) < pos(n));
            }
        }
    }

    #[test]
    fn blankets() {
        let net = chain();
        let b = net.find("B").unwrap();
        let expected: BTreeSet<_> = [net.find("A").unwrap(), net.find("C").unwrap()].into();
        assert_eq!(net.markov_blanket(b), expected);

        // v-structure A -> C <- B
        let mut bld = NetworkBuilder::new("v");
        let a = bld.add_node("A", 2);
        let bb = bld.add_node("B", 2);
        let c = bld.add_node("C", 2);
        let iso = bld.add_node("I", 2);
        bld.set_parents(c, &[a, bb]);
        bld.set_cpt(a, vec![0.5, 0.5]);
        bld.set_cpt(bb, vec![0.5, 0.5]);
        bld.set_cpt(iso, vec![0.5, 0.5]);
        bld.set_cpt(c, vec![0.5; 8]);
        let v = bld.build().unwrap();
        assert_eq!(v.markov_blanket(a), [bb, c].into());
        assert!(v.markov_blanket(iso).is_empty());
        assert_eq!(v.markov_neighborhood(iso, 4), [iso].into());
        assert_eq!(v.markov_neighborhood(a, 0), [a].into());
        assert_eq!(v.markov_neighborhood(a, 1), [a, bb, c].into());
    }

    #[test]
    fn ancestors_include_seeds() {
        let net = chain();
        let c = net.find("C").unwrap();
        assert_eq!(net.ancestors([c]).len(), 3);
        let a = net.find("A").unwrap();
        assert_eq!(net.ancestors([a]), [a].into());
        let d = diamond();
        assert_eq!(d.ancestors([NodeId(3)]).len(), 4);
        assert_eq!(d.ancestors([NodeId(1)]), [NodeId(0), NodeId(1)].into());
    }

    #[test]
    fn validation_errors() {
        let mut b = NetworkBuilder::new("bad");
        let a = b.add_node("A", 2);
        b.set_cpt(a, vec![0.5, 0.6]);
        assert!(matches!(b.build(), Err(NetworkError::RowSum { .. })));

        let mut b = NetworkBuilder::new("bad");
        let a = b.add_node("A", 2);
        let c = b.add_node("B", 2);
        b.set_parents(c, &[a]);
        b.set_cpt(a, vec![0.5, 0.5]);
        b.set_cpt(c, vec![0.0, 0.0, 0.5, 0.5]);
        assert!(matches!(b.build(), Err(NetworkError::ZeroRow { row: 0, .. })));

        let mut b = NetworkBuilder::new("cyc");
        let a = b.add_node("A", 2);
        let c = b.add_node("B", 2);
        b.set_parents(c, &[a]).set_parents(a, &[c]);
        b.set_cpt(a, vec![0.5; 4]).set_cpt(c, vec![0.5; 4]);
        assert!(matches!(b.build(), Err(NetworkError::Cycle(_))));

        let mut b = NetworkBuilder::new("card");
        let a = b.add_node("A", 1);
        b.set_cpt(a, vec![1.0]);
        assert!(matches!(b.build(), Err(NetworkError::Cardinality { .. })));

        let mut b = NetworkBuilder::new("shape");
        let a = b.add_node("A", 3);
        b.set_cpt(a, vec![0.5, 0.5]);
        assert!(matches!(b.build(), Err(NetworkError::CptShape { .. })));

        let mut b = NetworkBuilder::new("neg");
        let a = b.add_node("A", 2);
        b.set_cpt(a, vec![1.5, -0.5]);
        assert!(matches!(b.build(), Err(NetworkError::Probability { .. })));

        assert!(matches!(NetworkBuilder::new("e").build(), Err(NetworkError::Empty)));
    }

    #[test]
    fn row_index_last_parent_fastest() {
        let mut b = NetworkBuilder::new("rows");
        let p = b.add_node("P", 2);
        let q = b.add_node("Q", 3);
        let c = b.add_node("C", 2);
        b.set_parents(c, &[p, q]);
        b.set_cpt(p, vec![0.5, 0.5]).set_cpt(q, vec![0.2, 0.3, 0.5]);
        b.set_cpt(c, (0..6).flat_map(|r| [r as f64 / 10.0, 1.0 - r as f64 / 10.0]).collect());
        let net = b.build().unwrap();
        assert_eq!(net.row_index(c, &[1, 2, 0]), 5);
        assert_eq!(net.row_index(c, &[0, 1, 0]), 1);
        assert!((net.factor(c, &[1, 0, 0]) - 0.3).abs() < 1e-15);
    }
}
