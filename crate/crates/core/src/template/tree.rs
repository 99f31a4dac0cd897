//! Frequency-ordered prefix tree of log templates with leaf-count pruning.
//!
//! Tokens are reordered by corpus frequency before insertion, so messages
//! sharing frequent fixed text share tree prefixes, and highly variable
//! suffixes gather beneath a single node where the leaf counter exposes
//! them. Pruning collapses any below-root subtree with more distinct
//! templates than `max_leaves` into a wildcard — the tree's way of
//! discovering variables the masking patterns didn't catch.

use super::preprocess::{preprocess, Preprocessed, WILDCARD};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Stable template identifier. 0 is reserved for messages with no fixed
/// text (every token masked); real templates start at 1.
pub type TemplateId = u64;

/// Reserved id for all-variable messages.
pub const EMPTY_TEMPLATE_ID: TemplateId = 0;

/// One discovered template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: TemplateId,
    /// Tokens in tree-path order (frequency-ordered, wildcards last).
    pub tokens: Vec<String>,
    /// Number of raw messages that matched this template.
    pub support: u64,
}

impl Template {
    /// Tokens that carry fixed message text (everything but wildcards).
    pub fn content_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str).filter(|t| *t != WILDCARD)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
struct Node {
    children: BTreeMap<String, Node>,
    /// Distinct templates whose paths pass through (or end at) this node.
    leaf_count: usize,
    /// End-of-template marker.
    template: Option<TemplateId>,
}

/// The template tree plus its frozen token-frequency ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateTree {
    /// Corpus token frequencies, fixed at build time. Incremental inserts
    /// reuse this ranking; recomputing it would reshuffle existing paths.
    frequencies: BTreeMap<String, u64>,
    root: Node,
    templates: BTreeMap<TemplateId, Template>,
    next_id: TemplateId,
    max_leaves: usize,
}

/// Counts preprocessed-token frequencies over a corpus.
pub fn token_frequencies<S: AsRef<str>>(messages: &[S]) -> BTreeMap<String, u64> {
    let mut freq = BTreeMap::new();
    for message in messages {
        if let Preprocessed::Tokens(tokens) = preprocess(message.as_ref()) {
            for token in tokens {
                *freq.entry(token).or_insert(0) += 1;
            }
        }
    }
    freq
}

impl TemplateTree {
    /// Creates an empty tree over a fixed token-frequency ranking.
    pub fn new(frequencies: BTreeMap<String, u64>, max_leaves: usize) -> Self {
        Self {
            frequencies,
            root: Node::default(),
            templates: BTreeMap::new(),
            next_id: 1,
            max_leaves: max_leaves.max(1),
        }
    }

    /// Builds a pruned tree from a corpus and returns the per-message
    /// template ids (already remapped through the prune step).
    pub fn build<S: AsRef<str>>(messages: &[S], max_leaves: usize) -> (Self, Vec<TemplateId>) {
        let mut tree = Self::new(token_frequencies(messages), max_leaves);
        let mut ids: Vec<TemplateId> = messages
            .iter()
            .map(|m| tree.insert_message(m.as_ref()))
            .collect();
        let remap = tree.prune(max_leaves);
        for id in &mut ids {
            if let Some(new_id) = remap.get(id) {
                *id = *new_id;
            }
        }
        (tree, ids)
    }

    pub fn template_count(&self) -> usize {
        self.templates.len()
    }

    pub fn template(&self, id: TemplateId) -> Option<&Template> {
        self.templates.get(&id)
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }

    pub fn max_leaves(&self) -> usize {
        self.max_leaves
    }

    /// Preprocesses and inserts one message, returning its template id
    /// (0 when the message has no fixed text).
    pub fn insert_message(&mut self, message: &str) -> TemplateId {
        match preprocess(message) {
            Preprocessed::AllVariables => EMPTY_TEMPLATE_ID,
            Preprocessed::Tokens(tokens) => self.insert_tokens(tokens),
        }
    }

    /// Inserts an already-preprocessed token list.
    pub fn insert_tokens(&mut self, tokens: Vec<String>) -> TemplateId {
        if tokens.is_empty() || tokens.iter().all(|t| t == WILDCARD) {
            return EMPTY_TEMPLATE_ID;
        }
        let ordered = self.order_tokens(tokens);
        let mut cur = &mut self.root;
        for token in &ordered {
            cur = cur.children.entry(token.clone()).or_default();
        }
        if let Some(id) = cur.template {
            self.templates.get_mut(&id).expect("template recorded").support += 1;
            return id;
        }
        let id = self.next_id;
        self.next_id += 1;
        cur.template = Some(id);
        self.templates.insert(
            id,
            Template {
                id,
                tokens: ordered.clone(),
                support: 1,
            },
        );
        // A new template passes through every node on its path.
        self.root.leaf_count += 1;
        let mut cur = &mut self.root;
        for token in &ordered {
            cur = cur.children.get_mut(token).expect("path just created");
            cur.leaf_count += 1;
        }
        id
    }

    /// Reorders tokens for insertion: descending corpus frequency, ties
    /// broken lexicographically — except wildcards, which always sort
    /// last. The wildcard is usually the most frequent token of all, and
    /// placing it early would hang the bulk of the tree beneath wildcard
    /// nodes, where leaf-count pruning would wipe out real templates.
    /// Tokens absent from the ranking count as frequency 0.
    fn order_tokens(&self, mut tokens: Vec<String>) -> Vec<String> {
        tokens.sort_by(|a, b| {
            let key = |t: &String| {
                (
                    t == WILDCARD,
                    std::cmp::Reverse(self.frequencies.get(t).copied().unwrap_or(0)),
                )
            };
            key(a).cmp(&key(b)).then_with(|| a.cmp(b))
        });
        tokens
    }

    /// Collapses every below-root subtree holding more than `max_leaves`
    /// distinct templates into `path + <*>`. Returns the id remap for
    /// merged templates (ids not in the map are unchanged). The merged
    /// template keeps the smallest id in its group; supports add up.
    pub fn prune(&mut self, max_leaves: usize) -> BTreeMap<TemplateId, TemplateId> {
        let max_leaves = max_leaves.max(1);
        self.max_leaves = max_leaves;

        // (collapsed path tokens, merged ids)
        let mut merges: Vec<(Vec<String>, Vec<TemplateId>)> = Vec::new();
        let mut path: Vec<String> = Vec::new();
        collapse_walk(&mut self.root, &mut path, max_leaves, &mut merges);

        let mut remap = BTreeMap::new();
        for (tokens, ids) in merges {
            let keep = *ids.iter().min().expect("non-empty merge group");
            let mut support = 0;
            for id in &ids {
                support += self
                    .templates
                    .remove(id)
                    .expect("merged template recorded")
                    .support;
                remap.insert(*id, keep);
            }
            self.templates.insert(
                keep,
                Template {
                    id: keep,
                    tokens,
                    support,
                },
            );
        }
        recount_leaves(&mut self.root);
        remap
    }

    /// Looks up a message against the tree without modifying it: exact
    /// child first, wildcard child second; on a dead end, the deepest
    /// end-of-template marker already passed (or 0 if none).
    pub fn extract(&self, message: &str) -> TemplateId {
        self.extract_counting(message).0
    }

    /// [`extract`], also reporting how many child-map probes the walk
    /// performed (at most two per token — the basis of the O(message
    /// length) lookup cost, independent of how many templates exist).
    pub fn extract_counting(&self, message: &str) -> (TemplateId, u64) {
        let tokens = match preprocess(message) {
            Preprocessed::AllVariables => return (EMPTY_TEMPLATE_ID, 0),
            Preprocessed::Tokens(tokens) => tokens,
        };
        let ordered = self.order_tokens(tokens);
        let mut probes = 0u64;
        let mut cur = &self.root;
        let mut best = EMPTY_TEMPLATE_ID;
        for token in &ordered {
            probes += 1;
            let next = match cur.children.get(token) {
                Some(n) => n,
                None => {
                    probes += 1;
                    match cur.children.get(WILDCARD) {
                        Some(n) => n,
                        None => return (best, probes),
                    }
                }
            };
            cur = next;
            if let Some(id) = cur.template {
                best = id;
            }
        }
        (best, probes)
    }

    /// Incremental lookup: a miss inserts a new template and the tree
    /// grows; an exact hit increments the template's support.
    pub fn extract_or_insert(&mut self, message: &str) -> TemplateId {
        self.insert_message(message)
    }
}

fn collapse_walk(
    node: &mut Node,
    path: &mut Vec<String>,
    max_leaves: usize,
    merges: &mut Vec<(Vec<String>, Vec<TemplateId>)>,
) {
    for (token, child) in node.children.iter_mut() {
        path.push(token.clone());
        // Count templates strictly below the child; the child's own
        // end-of-template marker (if any) is not "beneath the cut".
        let below = child.leaf_count - usize::from(child.template.is_some());
        if below > max_leaves {
            let mut ids = Vec::new();
            collect_below(child, &mut ids);
            debug_assert_eq!(ids.len(), below);
            child.children.clear();
            let keep = *ids.iter().min().expect("non-empty subtree");
            let mut wildcard_node = Node {
                children: BTreeMap::new(),
                leaf_count: 1,
                template: Some(keep),
            };
            // Leaf counts are rebuilt wholesale after the walk.
            wildcard_node.leaf_count = 1;
            child.children.insert(WILDCARD.to_string(), wildcard_node);
            let mut tokens = path.clone();
            tokens.push(WILDCARD.to_string());
            merges.push((tokens, ids));
        } else {
            collapse_walk(child, path, max_leaves, merges);
        }
        path.pop();
    }
}

/// Collects template ids strictly below `node`.
fn collect_below(node: &Node, ids: &mut Vec<TemplateId>) {
    for child in node.children.values() {
        if let Some(id) = child.template {
            ids.push(id);
        }
        collect_below(child, ids);
    }
}

fn recount_leaves(node: &mut Node) -> usize {
    let mut count = usize::from(node.template.is_some());
    for child in node.children.values_mut() {
        count += recount_leaves(child);
    }
    node.leaf_count = count;
    count
}
