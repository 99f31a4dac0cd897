//! Layered Bayesian network for root-cause diagnosis.
//!
//! Three layers of binary nodes: metric nodes (the feature bits), module
//! nodes (which platform component is at fault), and type nodes (which
//! kind of fault). Structure comes from two sources — platform topology
//! supplies the layer-crossing edges ([`allocate`]), and the PC algorithm
//! learns causal edges among the metric nodes from data ([`pc_learn`]).
//! Conditional probability tables are Laplace-smoothed maximum-likelihood
//! counts ([`fit_cpts`]); diagnosis is exact inference by variable
//! elimination ([`BayesNet::infer`]).

mod cpt;
mod infer;
mod pc;

pub use cpt::{fit_cpts, node_state, parent_config, Cpt};
pub use infer::{Diagnosis, TypeScore, DEFAULT_CONFIDENCE_FLOOR};
pub use pc::{pc_learn, PcResult};

use crate::data::{Dataset, PlatformTopology};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("feature {feature_id} has no owning module in the topology")]
    UnownedFeature { feature_id: String },
    #[error("module dependencies form a cycle: {cycle}")]
    DependencyCycle { cycle: String },
    #[error("adding causal edges would create a cycle through {node}")]
    CausalCycle { node: String },
    #[error("node {node} has {count} parents; at most 64 are supported")]
    TooManyParents { node: String, count: usize },
    #[error("causal learning needs at least 2 metric features (got {count})")]
    TooFewFeatures { count: usize },
    #[error("causal learning needs both healthy and failure samples")]
    OnePolarityOnly,
    #[error("significance level must be in (0, 1), got {alpha}")]
    BadAlpha { alpha: f64 },
    #[error("evidence references unknown metric node {feature_id}")]
    UnknownEvidence { feature_id: String },
    #[error("node {node} is not part of the network")]
    UnknownNode { node: String },
    #[error("query node {node} is already observed")]
    QueryObserved { node: String },
    #[error("evidence has probability zero under the model")]
    DegenerateEvidence,
    #[error("enumeration over {hidden} unobserved nodes is too large")]
    EnumerationTooLarge { hidden: usize },
    #[error("model has no type nodes to rank")]
    NoTypes,
}

/// A node in the diagnosis network. The enum order (metric < module <
/// type) matches the layer order, so sorted node lists are already
/// topologically friendly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Metric(String),
    Module(String),
    Type(String),
}

impl Node {
    pub fn name(&self) -> &str {
        match self {
            Node::Metric(s) | Node::Module(s) | Node::Type(s) => s,
        }
    }
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Node::Metric(s) => write!(f, "metric:{s}"),
            Node::Module(s) => write!(f, "module:{s}"),
            Node::Type(s) => write!(f, "type:{s}"),
        }
    }
}

/// The network's directed structure across the three layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStructure {
    pub nodes: BTreeSet<Node>,
    pub edges: BTreeSet<(Node, Node)>,
    /// type_id → module_id: the single module parent of each type node.
    pub type_owner: BTreeMap<String, String>,
}

impl NetworkStructure {
    /// Sorted parents of a node.
    pub fn parents(&self, node: &Node) -> Vec<Node> {
        self.edges
            .iter()
            .filter(|(_, to)| to == node)
            .map(|(from, _)| from.clone())
            .collect()
    }

    pub fn metric_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n, Node::Metric(_)))
    }

    pub fn module_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n, Node::Module(_)))
    }

    pub fn type_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n, Node::Type(_)))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Kahn's algorithm; on failure, names one cycle.
    pub fn validate_acyclic(&self) -> Result<(), BayesError> {
        let mut indegree: BTreeMap<&Node, usize> =
            self.nodes.iter().map(|n| (n, 0usize)).collect();
        for (_, to) in &self.edges {
            *indegree.get_mut(to).expect("edge endpoint is a node") += 1;
        }
        let mut queue: Vec<&Node> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut seen = 0usize;
        while let Some(node) = queue.pop() {
            seen += 1;
            for (from, to) in &self.edges {
                if from == node {
                    let d = indegree.get_mut(to).expect("node");
                    *d -= 1;
                    if *d == 0 {
                        queue.push(to);
                    }
                }
            }
        }
        if seen == self.nodes.len() {
            return Ok(());
        }
        // Walk the leftover subgraph to print one concrete cycle.
        let stuck: Vec<&Node> = indegree
            .iter()
            .filter(|(_, &d)| d > 0)
            .map(|(&n, _)| n)
            .collect();
        let mut path = vec![stuck[0]];
        loop {
            let cur = *path.last().expect("non-empty");
            let next = self
                .edges
                .iter()
                .find(|(from, to)| from == cur && stuck.contains(&to))
                .map(|(_, to)| to)
                .expect("stuck node has a stuck successor");
            if let Some(pos) = path.iter().position(|&n| n == next) {
                let names: Vec<String> = path[pos..]
                    .iter()
                    .chain(std::iter::once(&next))
                    .map(|n| n.to_string())
                    .collect();
                return Err(BayesError::DependencyCycle {
                    cycle: names.join(" -> "),
                });
            }
            path.push(next);
        }
    }
}

/// Builds the knowledge-allocated structure from topology and feature
/// ids. Edges: each metric points at its owning module; each module
/// points at its cause types; declared module dependencies become
/// module→module edges; and each metric also points at the types of the
/// module it belongs to, so that fault types are distinguishable by the
/// evidence pattern and not just by their base rates.
pub fn allocate(
    topo: &PlatformTopology,
    feature_ids: &[String],
) -> Result<NetworkStructure, BayesError> {
    let mut nodes: BTreeSet<Node> = BTreeSet::new();
    let mut edges: BTreeSet<(Node, Node)> = BTreeSet::new();

    for module in &topo.modules {
        nodes.insert(Node::Module(module.clone()));
    }
    for (type_id, module) in &topo.cause_types {
        nodes.insert(Node::Type(type_id.clone()));
        edges.insert((Node::Module(module.clone()), Node::Type(type_id.clone())));
    }
    for (from, to) in &topo.module_dependencies {
        edges.insert((Node::Module(from.clone()), Node::Module(to.clone())));
    }

    // metric → owning module, and metric → each type of that module.
    let mut owned_types: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (type_id, module) in &topo.cause_types {
        owned_types
            .entry(module.as_str())
            .or_default()
            .push(type_id.as_str());
    }
    for feature in feature_ids {
        let owner = feature
            .strip_prefix("kpi:")
            .and_then(|metric| topo.metric_owner.get(metric))
            .or_else(|| topo.pattern_owner.get(feature))
            .ok_or_else(|| BayesError::UnownedFeature {
                feature_id: feature.clone(),
            })?;
        let metric = Node::Metric(feature.clone());
        nodes.insert(metric.clone());
        edges.insert((metric.clone(), Node::Module(owner.clone())));
        for type_id in owned_types.get(owner.as_str()).into_iter().flatten() {
            edges.insert((metric.clone(), Node::Type(type_id.to_string())));
        }
    }

    let structure = NetworkStructure {
        nodes,
        edges,
        type_owner: topo.cause_types.clone(),
    };
    structure.validate_acyclic()?;
    Ok(structure)
}

/// Adds PC-learned causal edges (between metric nodes) to an allocated
/// structure. The merged graph is re-validated; a cycle is an error.
pub fn with_causal_edges(
    mut structure: NetworkStructure,
    causal: &BTreeSet<(String, String)>,
) -> Result<NetworkStructure, BayesError> {
    for (from, to) in causal {
        let from_node = Node::Metric(from.clone());
        let to_node = Node::Metric(to.clone());
        for n in [&from_node, &to_node] {
            if !structure.nodes.contains(n) {
                return Err(BayesError::UnknownEvidence {
                    feature_id: n.name().to_string(),
                });
            }
        }
        structure.edges.insert((from_node, to_node));
    }
    structure.validate_acyclic().map_err(|_| {
        BayesError::CausalCycle {
            node: causal
                .iter()
                .next()
                .map(|(f, _)| f.clone())
                .unwrap_or_default(),
        }
    })?;
    Ok(structure)
}

/// A trained model: structure, tables, and the feature order it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesNet {
    pub structure: NetworkStructure,
    /// One table per node, sorted by node.
    pub cpts: Vec<Cpt>,
    pub feature_ids: Vec<String>,
    pub training_fingerprint: u64,
}

impl BayesNet {
    pub fn cpt(&self, node: &Node) -> Option<&Cpt> {
        self.cpts
            .binary_search_by(|c| c.node.cmp(node))
            .ok()
            .map(|i| &self.cpts[i])
    }
}

/// Knobs for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    /// Significance level for the conditional independence tests.
    pub causal_alpha: f64,
    /// Largest conditioning set the structure search will try.
    pub max_condition_size: usize,
    /// Learn metric-to-metric causal edges at all (they refine the
    /// structure; diagnosis works without them).
    pub learn_causal: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            causal_alpha: 0.05,
            max_condition_size: 1,
            learn_causal: true,
        }
    }
}

/// A trained network plus non-fatal notes from the training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: BayesNet,
    pub warnings: Vec<String>,
}

/// End-to-end training: allocate the layered structure from the
/// topology, learn causal edges among the metrics, and fit the tables.
pub fn train(
    topo: &PlatformTopology,
    matrix: &FeatureMatrix,
    options: &TrainOptions,
) -> Result<TrainedModel, BayesError> {
    let feature_ids = &matrix.dataset.feature_ids;
    let mut structure = allocate(topo, feature_ids)?;
    let mut warnings = Vec::new();
    if options.learn_causal {
        let pc = pc_learn(
            feature_ids,
            &matrix.dataset.samples,
            options.causal_alpha,
            options.max_condition_size,
        )?;
        warnings.extend(pc.warnings.iter().cloned());
        structure = with_causal_edges(structure, &pc.edges)?;
    }
    let cpts = fit_cpts(&structure, &matrix.dataset.samples)?;
    let model = BayesNet {
        structure,
        cpts,
        feature_ids: feature_ids.clone(),
        training_fingerprint: dataset_fingerprint(&matrix.dataset),
    };
    Ok(TrainedModel { model, warnings })
}

/// FNV-1a over the dataset's canonical JSON form; stored in the model so
/// a persisted network can be traced back to what it was fit on.
pub fn dataset_fingerprint(dataset: &Dataset) -> u64 {
    let bytes = serde_json::to_vec(dataset).expect("dataset serializes");
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
