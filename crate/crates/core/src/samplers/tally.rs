use super::WeightedTrial;
use crate::belief::BeliefTable;
use crate::network::Network;

/// Running weighted count of sampled states per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTally {
    sums: Vec<Vec<f64>>,
    trials: u64,
    positive: u64,
    total_weight: f64,
}

impl FrequencyTally {
    pub fn new(net: &Network) -> Self {
        Self {
            sums: net.nodes().iter().map(|n| vec![0.0; n.cardinality]).collect(),
            trials: 0,
            positive: 0,
            total_weight: 0.0,
        }
    }

    pub fn record(&mut self, sample: &WeightedTrial) {
        self.trials += 1;
        if sample.weight > 0.0 {
            self.positive += 1;
            self.total_weight += sample.weight;
            for (row, &s) in self.sums.iter_mut().zip(sample.trial.states()) {
                row[s] += sample.weight;
            }
        }
    }

    /// Forgets every recorded trial.
    pub fn reset(&mut self) {
        self.sums.iter_mut().for_each(|row| row.fill(0.0));
        self.trials = 0;
        self.positive = 0;
        self.total_weight = 0.0;
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Trials recorded with positive weight.
    pub fn positive_trials(&self) -> u64 {
        self.positive
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn sums(&self) -> &[Vec<f64>] {
        &self.sums
    }

    pub fn estimate(&self) -> BeliefTable {
        frequency_estimate(self)
    }

    /// Adds another tally's counts, for independently sampled chains.
    pub fn merge(&mut self, other: &FrequencyTally) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.trials += other.trials;
        self.positive += other.positive;
        self.total_weight += other.total_weight;
    }
}

/// The importance-sampling estimate: each node's tally normalised to one.
pub fn frequency_estimate(tally: &FrequencyTally) -> BeliefTable {
    BeliefTable::from_partial_sums(&tally.sums, tally.total_weight)
}
