//! Conditional probability tables fit by counting.
//!
//! Tables are sparse: only parent configurations that actually occur in
//! training data hold counts. Probabilities are Laplace-smoothed, and a
//! configuration never seen in training falls back to the smoothed prior
//! of an empty cell, 1/2 — maximally noncommittal rather than zero.

use super::{BayesError, NetworkStructure, Node};
use crate::data::{Polarity, Sample};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sparse conditional probability table for one binary node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: Node,
    /// Sorted; bit i of a configuration key is the state of `parents[i]`.
    pub parents: Vec<Node>,
    /// configuration → (count of node=0, count of node=1).
    pub counts: Vec<(u64, (u64, u64))>,
}

impl Cpt {
    /// P(node = 1 | configuration), Laplace-smoothed (add one to each
    /// outcome). Unseen configurations give (0+1)/(0+2) = 1/2.
    pub fn probability_one(&self, config: u64) -> f64 {
        let (n0, n1) = self
            .counts
            .binary_search_by_key(&config, |&(c, _)| c)
            .map(|i| self.counts[i].1)
            .unwrap_or((0, 0));
        (n1 as f64 + 1.0) / ((n0 + n1) as f64 + 2.0)
    }

    /// P(node = state | configuration).
    pub fn probability(&self, state: u8, config: u64) -> f64 {
        let one = self.probability_one(config);
        if state == 1 {
            one
        } else {
            1.0 - one
        }
    }
}

/// The observed binary state of a network node in one labeled window.
/// Metric nodes read their feature bit; module and type nodes are 1
/// exactly when the window is a failure labeled with that module/type.
pub fn node_state(node: &Node, sample: &Sample) -> u8 {
    match node {
        Node::Metric(feature_id) => sample.bit(feature_id),
        Node::Module(module_id) => {
            let labeled = sample.polarity == Polarity::Negative
                && sample
                    .label
                    .as_ref()
                    .is_some_and(|l| &l.module_id == module_id);
            u8::from(labeled)
        }
        Node::Type(type_id) => {
            let labeled = sample.polarity == Polarity::Negative
                && sample
                    .label
                    .as_ref()
                    .is_some_and(|l| &l.type_id == type_id);
            u8::from(labeled)
        }
    }
}

/// Packs the states of `parents` (sorted order) into a configuration key.
pub fn parent_config(parents: &[Node], sample: &Sample) -> u64 {
    parents
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, parent)| {
            acc | (u64::from(node_state(parent, sample)) << i)
        })
}

/// Fits one table per node from labeled windows. Parent lists come from
/// the structure and are sorted, so the bit layout of configuration keys
/// is reproducible. Nodes with more than 64 parents are rejected — the
/// key is a u64 bitmask.
pub fn fit_cpts(
    structure: &NetworkStructure,
    samples: &[Sample],
) -> Result<Vec<Cpt>, BayesError> {
    let mut cpts = Vec::with_capacity(structure.nodes.len());
    for node in &structure.nodes {
        let parents = structure.parents(node);
        if parents.len() > 64 {
            return Err(BayesError::TooManyParents {
                node: node.to_string(),
                count: parents.len(),
            });
        }
        let mut counts: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
        for sample in samples {
            let config = parent_config(&parents, sample);
            let cell = counts.entry(config).or_insert((0, 0));
            if node_state(node, sample) == 1 {
                cell.1 += 1;
            } else {
                cell.0 += 1;
            }
        }
        cpts.push(Cpt {
            node: node.clone(),
            parents,
            counts: counts.into_iter().collect(),
        });
    }
    Ok(cpts)
}
