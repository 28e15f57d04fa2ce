//! Node-side encode-once cache and per-node privacy accounting.

use std::sync::OnceLock;

use rand::Rng;

use super::{multibit_encode, Epsilon, MechanismParams};
use crate::error::{Error, Result};

#[derive(Debug)]
struct Cached {
    params: MechanismParams,
    row: Vec<i8>,
}

/// Holds each node's first encoding so later requests replay it instead of
/// spending budget again. Safe to share across threads: concurrent first
/// calls for one node agree on a single stored row.
#[derive(Debug)]
pub struct EncodingStore {
    slots: Vec<OnceLock<Cached>>,
}

impl EncodingStore {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            slots: (0..num_nodes).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.slots.len()
    }

    pub fn get(&self, node: usize) -> Option<&[i8]> {
        self.slots.get(node)?.get().map(|c| c.row.as_slice())
    }

    /// Returns the node's stored encoding, encoding `x` first if none exists.
    /// A later call with different parameters is refused.
    pub fn encode_once<R: Rng>(
        &self,
        node: usize,
        x: &[f64],
        params: &MechanismParams,
        rng: impl FnOnce() -> R,
    ) -> Result<&[i8]> {
        let slot = self.slots.get(node).ok_or_else(|| {
            Error::Argument(format!("node {node} outside 0..{}", self.slots.len()))
        })?;
        if slot.get().is_none() {
            let row = multibit_encode(x, params, &mut rng())?;
            let _ = slot.set(Cached {
                params: *params,
                row,
            });
        }
        let cached = slot.get().expect("slot was just filled");
        if cached.params != *params {
            return Err(Error::Budget(format!(
                "node {node} was already encoded with {:?}; refusing to re-encode with {:?}",
                cached.params, params
            )));
        }
        Ok(&cached.row)
    }
}

/// Budget spent by one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeBudget {
    pub feature: Option<Epsilon>,
    pub label: Option<Epsilon>,
    /// Times a feature randomizer actually ran for this node.
    pub feature_invocations: u32,
    pub label_invocations: u32,
}

impl NodeBudget {
    /// Total ε released; infinite if anything was sent unrandomized.
    pub fn total(&self) -> f64 {
        self.feature.map_or(0.0, Epsilon::value) + self.label.map_or(0.0, Epsilon::value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetLedger {
    nodes: Vec<NodeBudget>,
}

impl BudgetLedger {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            nodes: vec![NodeBudget::default(); num_nodes],
        }
    }

    fn slot(&mut self, node: usize) -> Result<&mut NodeBudget> {
        let n = self.nodes.len();
        self.nodes
            .get_mut(node)
            .ok_or_else(|| Error::Argument(format!("node {node} outside 0..{n}")))
    }

    /// Records a feature release. `randomized` is false when the raw vector
    /// was sent (infinite budget).
    pub fn record_feature(
        &mut self,
        node: usize,
        epsilon: Epsilon,
        randomized: bool,
    ) -> Result<()> {
        let b = self.slot(node)?;
        if b.feature.is_some() {
            return Err(Error::Budget(format!(
                "features of node {node} collected twice"
            )));
        }
        b.feature = Some(epsilon);
        b.feature_invocations += u32::from(randomized);
        Ok(())
    }

    pub fn record_label(&mut self, node: usize, epsilon: Epsilon, randomized: bool) -> Result<()> {
        let b = self.slot(node)?;
        if b.label.is_some() {
            return Err(Error::Budget(format!(
                "label of node {node} collected twice"
            )));
        }
        b.label = Some(epsilon);
        b.label_invocations += u32::from(randomized);
        Ok(())
    }

    pub fn node(&self, node: usize) -> &NodeBudget {
        &self.nodes[node]
    }

    pub fn nodes(&self) -> &[NodeBudget] {
        &self.nodes
    }

    /// Largest total spent by any node.
    pub fn max_total(&self) -> f64 {
        self.nodes.iter().map(NodeBudget::total).fold(0.0, f64::max)
    }
}
