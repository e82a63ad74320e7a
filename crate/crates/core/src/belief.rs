use crate::network::{Network, NodeId};

/// Per-node posterior estimates.
///
/// An undefined table (no conforming mass or weight) keeps every cell at zero,
/// so scoring it against an exact solution charges the full exact value.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefTable {
    values: Vec<Vec<f64>>,
    defined: bool,
}

impl BeliefTable {
    pub fn undefined(cardinalities: &[usize]) -> Self {
        Self {
            values: cardinalities.iter().map(|&c| vec![0.0; c]).collect(),
            defined: false,
        }
    }

    /// Normalises each node's row of nonnegative sums. Any all-zero row makes
    /// the whole table undefined.
    pub fn from_sums(sums: Vec<Vec<f64>>) -> Self {
        let mut values = sums;
        let mut defined = true;
        for row in &mut values {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                defined = false;
            }
        }
        if !defined {
            values.iter_mut().for_each(|row| row.fill(0.0));
        }
        Self { values, defined }
    }

    /// Normalises per-node sums that share one known total.
    pub fn from_partial_sums(sums: &[Vec<f64>], total: f64) -> Self {
        if total <= 0.0 {
            let cards: Vec<usize> = sums.iter().map(Vec::len).collect();
            return Self::undefined(&cards);
        }
        Self {
            values: sums
                .iter()
                .map(|row| row.iter().map(|v| v / total).collect())
                .collect(),
            defined: true,
        }
    }

    pub fn point_mass(net: &Network, states: &[usize]) -> Self {
        let values = net
            .node_ids()
            .map(|n| {
                let mut row = vec![0.0; net.cardinality(n)];
                row[states[n.0]] = 1.0;
                row
            })
            .collect();
        Self {
            values,
            defined: true,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.defined
    }

    pub fn node(&self, node: NodeId) -> &[f64] {
        &self.values[node.0]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    /// Largest absolute deviation of a row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.values
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &BeliefTable) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.len() == b.len())
    }

    /// Largest cellwise absolute difference.
    pub fn max_abs_diff(&self, other: &BeliefTable) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance averaged over nodes.
    pub fn mean_total_variation(&self, other: &BeliefTable) -> f64 {
        let tv: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum();
        tv / self.values.len() as f64
    }
}
