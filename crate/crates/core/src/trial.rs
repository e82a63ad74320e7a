//! Trials (full assignments), their packed id codes, and evidence.
//!
//! Id codes pack each node's state into `ceil(log2(cardinality))` bits, node 0
//! in the least significant bits. Within a field the state is stored with its
//! least significant bit first, so the code read as an integer is
//! `sum(state[n] << offset[n])`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::network::{Network, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrialError {
    #[error("trial has {found} states but the network has {expected} nodes")]
    Length { expected: usize, found: usize },
    #[error("state {state} is out of range for node {node} with {cardinality} states")]
    State {
        node: usize,
        state: usize,
        cardinality: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("id code has {found} words, expected {expected}")]
    Width { expected: usize, found: usize },
    #[error("id code sets bits above the {0}-bit layout")]
    Overflow(u32),
    #[error("id code holds state {state} for node {node} with {cardinality} states")]
    State {
        node: usize,
        state: usize,
        cardinality: usize,
    },
    #[error("malformed hex id code `{0}`")]
    Hex(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("evidence names unknown node {0}")]
    UnknownNode(String),
    #[error("evidence state {state} is out of range for `{node}` with {cardinality} states")]
    State {
        node: String,
        state: usize,
        cardinality: usize,
    },
    #[error("node `{0}` is observed twice")]
    Duplicate(String),
    #[error("malformed evidence item `{0}`; expected name=state")]
    Syntax(String),
}

/// A complete assignment of states to every node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trial {
    states: Vec<usize>,
}

impl Trial {
    pub fn new(states: Vec<usize>) -> Self {
        Self { states }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [usize] {
        &mut self.states
    }

    pub fn into_states(self) -> Vec<usize> {
        self.states
    }

    pub fn state(&self, node: NodeId) -> usize {
        self.states[node.0]
    }

    pub fn set(&mut self, node: NodeId, state: usize) {
        self.states[node.0] = state;
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self, net: &Network) -> Result<(), TrialError> {
        if self.states.len() != net.len() {
            return Err(TrialError::Length {
                expected: net.len(),
                found: self.states.len(),
            });
        }
        for (node, (&state, n)) in self.states.iter().zip(net.nodes()).enumerate() {
            if state >= n.cardinality {
                return Err(TrialError::State {
                    node,
                    state,
                    cardinality: n.cardinality,
                });
            }
        }
        Ok(())
    }

    pub fn conforms(&self, evidence: &Evidence) -> bool {
        conforms(&self.states, evidence)
    }
}

pub fn conforms(states: &[usize], evidence: &Evidence) -> bool {
    evidence.iter().all(|(node, state)| states[node.0] == state)
}

/// Packed trial identifier; ordered as an unsigned integer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IdCode(Box<[u64]>);

impl IdCode {
    pub fn words(&self) -> &[u64] {
        &self.0
    }
}

impl Ord for IdCode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.iter().rev().cmp(other.0.iter().rev()))
    }
}

impl PartialOrd for IdCode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bit layout of id codes for one network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialLayout {
    cardinalities: Vec<usize>,
    offsets: Vec<u32>,
    widths: Vec<u32>,
    total_bits: u32,
}

fn field_width(cardinality: usize) -> u32 {
    usize::BITS - (cardinality - 1).leading_zeros()
}

impl TrialLayout {
    pub fn new(cardinalities: impl IntoIterator<Item = usize>) -> Self {
        let cardinalities: Vec<usize> = cardinalities.into_iter().collect();
        let widths: Vec<u32> = cardinalities.iter().map(|&c| field_width(c)).collect();
        let mut offsets = Vec::with_capacity(widths.len());
        let mut total_bits = 0;
        for &w in &widths {
            offsets.push(total_bits);
            total_bits += w;
        }
        Self {
            cardinalities,
            offsets,
            widths,
            total_bits,
        }
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn width(&self, node: NodeId) -> u32 {
        self.widths[node.0]
    }

    pub fn word_count(&self) -> usize {
        (self.total_bits as usize).div_ceil(64).max(1)
    }

    /// Hex digits in a snapshot code.
    pub fn hex_digits(&self) -> usize {
        (self.total_bits as usize).div_ceil(4).max(1)
    }

    pub fn encode(&self, states: &[usize]) -> IdCode {
        debug_assert_eq!(states.len(), self.widths.len());
        let mut words = vec![0u64; self.word_count()].into_boxed_slice();
        for (n, &state) in states.iter().enumerate() {
            let (offset, width) = (self.offsets[n], self.widths[n]);
            let word = (offset / 64) as usize;
            let shift = offset % 64;
            let value = state as u64;
            words[word] |= value << shift;
            if shift + width > 64 {
                words[word + 1] |= value >> (64 - shift);
            }
        }
        IdCode(words)
    }

    /// Decodes into `out`, which must hold one slot per node.
    pub fn decode_into(&self, code: &IdCode, out: &mut [usize]) -> Result<(), CodeError> {
        let words = code.words();
        if words.len() != self.word_count() {
            return Err(CodeError::Width {
                expected: self.word_count(),
                found: words.len(),
            });
        }
        let spare = self.word_count() as u32 * 64 - self.total_bits;
        if spare > 0 && spare < 64 && words[words.len() - 1] >> (64 - spare) != 0 {
            return Err(CodeError::Overflow(self.total_bits));
        }
        for (n, slot) in out.iter_mut().enumerate() {
            let (offset, width) = (self.offsets[n], self.widths[n]);
            let word = (offset / 64) as usize;
            let shift = offset % 64;
            let mut value = words[word] >> shift;
            if shift + width > 64 {
                value |= words[word + 1] << (64 - shift);
            }
            let state = (value & ((1u64 << width) - 1)) as usize;
            if state >= self.cardinalities[n] {
                return Err(CodeError::State {
                    node: n,
                    state,
                    cardinality: self.cardinalities[n],
                });
            }
            *slot = state;
        }
        Ok(())
    }

    pub fn decode(&self, code: &IdCode) -> Result<Trial, CodeError> {
        let mut states = vec![0; self.widths.len()];
        self.decode_into(code, &mut states)?;
        Ok(Trial::new(states))
    }

    /// Fixed-width big-endian hex rendering of a code.
    pub fn to_hex(&self, code: &IdCode) -> String {
        let digits = self.hex_digits();
        let mut out = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let bit = d * 4;
            let nibble = (code.words()[bit / 64] >> (bit % 64)) & 0xf;
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    pub fn from_hex(&self, text: &str) -> Result<IdCode, CodeError> {
        let bad = || CodeError::Hex(text.to_string());
        if text.is_empty() || text.len() > self.word_count() * 16 {
            return Err(bad());
        }
        let mut words = vec![0u64; self.word_count()].into_boxed_slice();
        for (d, ch) in text.chars().rev().enumerate() {
            let nibble = ch.to_digit(16).ok_or_else(bad)? as u64;
            let bit = d * 4;
            words[bit / 64] |= nibble << (bit % 64);
        }
        let code = IdCode(words);
        let mut scratch = vec![0; self.widths.len()];
        self.decode_into(&code, &mut scratch)?;
        Ok(code)
    }
}

impl Network {
    pub fn encode(&self, trial: &Trial) -> IdCode {
        self.layout().encode(trial.states())
    }

    pub fn decode(&self, code: &IdCode) -> Result<Trial, CodeError> {
        self.layout().decode(code)
    }
}

/// Observed states for a subset of nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Evidence {
    assignments: BTreeMap<NodeId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: NodeId, state: usize) -> Self {
        self.assignments.insert(node, state);
        self
    }

    /// Returns the previous observation of `node`, if any.
    pub fn insert(&mut self, node: NodeId, state: usize) -> Option<usize> {
        self.assignments.insert(node, state)
    }

    pub fn get(&self, node: NodeId) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.assignments.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (NodeId, usize)> + '_ {
        self.assignments.iter().map(|(&n, &s)| (n, s))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.assignments.keys().copied()
    }

    /// True when every observation in `self` also appears in `other`.
    pub fn is_subset_of(&self, other: &Evidence) -> bool {
        self.iter().all(|(n, s)| other.get(n) == Some(s))
    }

    pub fn validate(&self, net: &Network) -> Result<(), EvidenceError> {
        for (node, state) in self.iter() {
            if !net.contains(node) {
                return Err(EvidenceError::UnknownNode(node.to_string()));
            }
            let cardinality = net.cardinality(node);
            if state >= cardinality {
                return Err(EvidenceError::State {
                    node: net.node(node).name.clone(),
                    state,
                    cardinality,
                });
            }
        }
        Ok(())
    }

    /// Parses `name=state` items separated by commas or whitespace.
    pub fn parse(net: &Network, text: &str) -> Result<Self, EvidenceError> {
        let mut ev = Evidence::new();
        for item in text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
        {
            let (name, state) = item
                .split_once('=')
                .ok_or_else(|| EvidenceError::Syntax(item.to_string()))?;
            let node = net
                .find(name.trim())
                .ok_or_else(|| EvidenceError::UnknownNode(name.trim().to_string()))?;
            let state: usize = state
                .trim()
                .parse()
                .map_err(|_| EvidenceError::Syntax(item.to_string()))?;
            if ev.insert(node, state).is_some() {
                return Err(EvidenceError::Duplicate(name.trim().to_string()));
            }
        }
        ev.validate(net)?;
        Ok(ev)
    }

    /// Inverse of [`Evidence::parse`].
    pub fn render(&self, net: &Network) -> String {
        self.iter()
            .map(|(n, s)| format!("{}={}", net.node(n).name, s))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl FromIterator<(NodeId, usize)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (NodeId, usize)>>(iter: I) -> Self {
        Self {
            assignments: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.iter().map(|(n, s)| format!("{}={}", n.0, s)).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

/// Mixed-radix counter over joint states with node 0 varying fastest.
/// Observed nodes stay fixed at their evidence state.
#[derive(Clone, Debug)]
pub struct Odometer {
    cardinalities: Vec<usize>,
    free: Vec<usize>,
    states: Vec<usize>,
}

impl Odometer {
    pub fn new(net: &Network, evidence: &Evidence) -> Self {
        let mut states = vec![0; net.len()];
        for (n, s) in evidence.iter() {
            states[n.0] = s;
        }
        Self {
            cardinalities: net.cardinalities(),
            free: (0..net.len())
                .filter(|&n| !evidence.contains(NodeId(n)))
                .collect(),
            states,
        }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Steps to the next assignment; false once the counter wraps around.
    pub fn advance(&mut self) -> bool {
        for &n in &self.free {
            self.states[n] += 1;
            if self.states[n] < self.cardinalities[n] {
                return true;
            }
            self.states[n] = 0;
        }
        false
    }

    /// Visits every assignment, starting from the all-zero free state.
    pub fn for_each(mut self, mut f: impl FnMut(&[usize])) {
        loop {
            f(&self.states);
            if !self.advance() {
                break;
            }
        }
    }
}

/// Every trial conforming to `evidence`, in odometer order.
pub fn conforming_trials(net: &Network, evidence: &Evidence) -> Vec<Trial> {
    let mut out = Vec::new();
    Odometer::new(net, evidence).for_each(|s| out.push(Trial::new(s.to_vec())));
    out
}
