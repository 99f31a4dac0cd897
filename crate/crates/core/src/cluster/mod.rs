//! Semantic clustering of log templates.
//!
//! Templates with different wording but the same meaning ("link down" /
//! "link lost") should drive the same diagnosis feature. This module
//! embeds template tokens ([`train_embeddings`]), averages them into
//! template vectors, groups the vectors by average-linkage agglomerative
//! clustering under cosine distance, picks a representative per group,
//! and derives the similarity threshold used to assign new templates to
//! groups online.

mod word2vec;

pub use word2vec::{train_embeddings, Word2VecConfig};

use crate::template::{Template, TemplateId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Identifier of a log pattern (a cluster of templates).
pub type PatternId = u64;

/// Reserved pattern for templates whose vector is all-zero (no embeddable
/// content). It never appears in a trained pattern list; online
/// assignment routes such inputs here instead of growing the list.
pub const UNEMBEDDABLE_PATTERN_ID: PatternId = 0;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("embedding needs at least 2 distinct tokens and one co-occurrence (got {distinct_tokens} distinct)")]
    NoContextPairs { distinct_tokens: usize },
    #[error("embedding dimension must be at least 2 (got {dim})")]
    BadDimension { dim: usize },
    #[error("no vectors to cluster")]
    EmptyInput,
    #[error("threshold {value} outside {expected}")]
    BadThreshold { value: f64, expected: &'static str },
}

/// Trained token embeddings plus the fingerprint of the corpus they came
/// from (so mismatched table/corpus pairings are detectable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    corpus_fingerprint: u64,
}

impl EmbeddingTable {
    pub(crate) fn new(
        dimension: usize,
        vectors: BTreeMap<String, Vec<f64>>,
        corpus_fingerprint: u64,
    ) -> Self {
        debug_assert!(vectors.values().all(|v| v.len() == dimension));
        Self {
            dimension,
            vectors,
            corpus_fingerprint,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn corpus_fingerprint(&self) -> u64 {
        self.corpus_fingerprint
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vectors.len()
    }

    /// The trained vector for a token, if the token was in the corpus.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Vector for a token with the out-of-vocabulary rule applied: unseen
    /// tokens get the zero vector and a miss flag.
    pub fn lookup(&self, token: &str) -> (Vec<f64>, bool) {
        match self.vectors.get(token) {
            Some(v) => (v.clone(), false),
            None => (vec![0.0; self.dimension], true),
        }
    }
}

/// A template's vector: arithmetic mean of its non-wildcard token vectors
/// (with multiplicity). Returns the number of out-of-vocabulary tokens
/// encountered; those contribute zero vectors to the mean. A template
/// with no non-wildcard tokens yields the zero vector.
pub fn template_vector(template: &Template, table: &EmbeddingTable) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; table.dimension()];
    let mut count = 0usize;
    let mut misses = 0usize;
    for token in template.content_tokens() {
        count += 1;
        let (vector, miss) = table.lookup(token);
        if miss {
            misses += 1;
        }
        for (s, v) in sum.iter_mut().zip(&vector) {
            *s += v;
        }
    }
    if count > 0 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    (sum, misses)
}

/// Cosine similarity with two deliberate conventions: bit-identical
/// vectors score exactly 1.0 (so thresholds derived from self-similarity
/// are reachable without floating-point slack), and any zero-norm vector
/// scores 0.0 against everything else.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a == b {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a * norm_b)
}

/// A cluster of semantically equivalent templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPattern {
    pub pattern_id: PatternId,
    pub members: BTreeSet<TemplateId>,
    pub representative_template: TemplateId,
    pub representative_vector: Vec<f64>,
    /// Mean cosine similarity of the representative to the other members;
    /// 1.0 for a singleton.
    pub average_internal_similarity: f64,
}

/// Average-linkage agglomerative clustering under cosine distance
/// (1 − similarity): repeatedly merge the closest pair of clusters while
/// that distance stays strictly below `distance_threshold`. Ties break
/// toward the pair with the smallest member ids. Pattern ids are assigned
/// 1.. in order of each cluster's smallest member (0 stays reserved).
pub fn cluster(
    vectors: &BTreeMap<TemplateId, Vec<f64>>,
    distance_threshold: f64,
) -> Result<Vec<LogPattern>, ClusterError> {
    if vectors.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if !(distance_threshold > 0.0 && distance_threshold < 2.0) {
        return Err(ClusterError::BadThreshold {
            value: distance_threshold,
            expected: "(0, 2)",
        });
    }
    let ids: Vec<TemplateId> = vectors.keys().copied().collect();
    let n = ids.len();

    // Slot i starts as template ids[i]; merging always folds the higher
    // slot into the lower, so slot order stays ordered by smallest member.
    let mut active = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 1.0 - cosine_similarity(&vectors[&ids[i]], &vectors[&ids[j]]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                // Strict < keeps the first (smallest-id) pair on ties.
                if best.is_none_or(|(_, _, d)| dist[i][j] < d) {
                    best = Some((i, j, dist[i][j]));
                }
            }
        }
        let Some((i, j, d)) = best else { break };
        if d >= distance_threshold {
            break;
        }
        // Average linkage via the Lance–Williams recurrence:
        // d(k, i∪j) = (nᵢ·d(k,i) + nⱼ·d(k,j)) / (nᵢ+nⱼ).
        let size_i = members[i].len() as f64;
        let size_j = members[j].len() as f64;
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let merged = (size_i * dist[k][i] + size_j * dist[k][j]) / (size_i + size_j);
            dist[k][i] = merged;
            dist[i][k] = merged;
        }
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        active[j] = false;
    }

    let mut patterns = Vec::new();
    let mut next_pattern = 1;
    for slot in 0..n {
        if !active[slot] {
            continue;
        }
        let member_ids: BTreeSet<TemplateId> = members[slot].iter().map(|&k| ids[k]).collect();
        let representative = select_representative(&member_ids, vectors);
        let average = representative_average_similarity(representative, &member_ids, vectors);
        patterns.push(LogPattern {
            pattern_id: next_pattern,
            members: member_ids,
            representative_template: representative,
            representative_vector: vectors[&representative].clone(),
            average_internal_similarity: average,
        });
        next_pattern += 1;
    }
    Ok(patterns)
}

/// Picks the cluster center: the member whose mean cosine distance to the
/// other members, Score(i) = (1/(n−1)) Σ_j (1 − similarity(i, j)), is
/// smallest. Ties break toward the smallest template id; a singleton is
/// its own representative (Score 0 by convention).
pub fn select_representative(
    members: &BTreeSet<TemplateId>,
    vectors: &BTreeMap<TemplateId, Vec<f64>>,
) -> TemplateId {
    let ids: Vec<TemplateId> = members.iter().copied().collect();
    assert!(!ids.is_empty(), "representative of an empty member set");
    if ids.len() == 1 {
        return ids[0];
    }
    let mut best = ids[0];
    let mut best_score = f64::INFINITY;
    for &candidate in &ids {
        let score = member_score(candidate, &ids, vectors);
        if score < best_score {
            best_score = score;
            best = candidate;
        }
    }
    best
}

/// Score(i) over a member list; 0 for singletons. The j = i term of the
/// paper's sum is identically zero (self-similarity is exactly 1).
fn member_score(
    candidate: TemplateId,
    ids: &[TemplateId],
    vectors: &BTreeMap<TemplateId, Vec<f64>>,
) -> f64 {
    if ids.len() < 2 {
        return 0.0;
    }
    let total: f64 = ids
        .iter()
        .map(|&other| 1.0 - cosine_similarity(&vectors[&candidate], &vectors[&other]))
        .sum();
    total / (ids.len() - 1) as f64
}

fn representative_average_similarity(
    representative: TemplateId,
    members: &BTreeSet<TemplateId>,
    vectors: &BTreeMap<TemplateId, Vec<f64>>,
) -> f64 {
    if members.len() < 2 {
        return 1.0;
    }
    let total: f64 = members
        .iter()
        .filter(|&&id| id != representative)
        .map(|&id| cosine_similarity(&vectors[&representative], &vectors[&id]))
        .sum();
    total / (members.len() - 1) as f64
}

/// θ: the mean over patterns of each pattern's average internal
/// similarity. New templates join an existing pattern only when they are
/// at least this similar to some representative.
pub fn compute_threshold(patterns: &[LogPattern]) -> Result<f64, ClusterError> {
    if patterns.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    let total: f64 = patterns.iter().map(|p| p.average_internal_similarity).sum();
    Ok(total / patterns.len() as f64)
}

/// Assigns one new template vector against the trained patterns: best
/// similarity ≥ θ (inclusive) joins that pattern (ties toward the
/// smallest pattern id); otherwise a new pattern is created with the
/// input as its own representative. A zero vector has no direction to
/// compare, so it lands in the reserved unembeddable pattern. Returns
/// (pattern id, whether a new pattern was created).
pub fn assign_online(
    template_id: TemplateId,
    vector: &[f64],
    patterns: &mut Vec<LogPattern>,
    theta: f64,
) -> Result<(PatternId, bool), ClusterError> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(ClusterError::BadThreshold {
            value: theta,
            expected: "[-1, 1]",
        });
    }
    if vector.iter().all(|&v| v == 0.0) {
        return Ok((UNEMBEDDABLE_PATTERN_ID, false));
    }
    let mut best: Option<(PatternId, f64)> = None;
    for pattern in patterns.iter() {
        let sim = cosine_similarity(vector, &pattern.representative_vector);
        // Strict > keeps the earliest (smallest-id) pattern on ties.
        if best.is_none_or(|(_, s)| sim > s) {
            best = Some((pattern.pattern_id, sim));
        }
    }
    if let Some((pattern_id, sim)) = best {
        if sim >= theta {
            let pattern = patterns
                .iter_mut()
                .find(|p| p.pattern_id == pattern_id)
                .expect("pattern id from the same list");
            pattern.members.insert(template_id);
            return Ok((pattern_id, false));
        }
    }
    let pattern_id = patterns.iter().map(|p| p.pattern_id).max().unwrap_or(0) + 1;
    patterns.push(LogPattern {
        pattern_id,
        members: BTreeSet::from([template_id]),
        representative_template: template_id,
        representative_vector: vector.to_vec(),
        average_internal_similarity: 1.0,
    });
    Ok((pattern_id, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::WILDCARD;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn template(id: TemplateId, tokens: &[&str]) -> Template {
        Template {
            id,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            support: 1,
        }
    }

    fn table(dim: usize, entries: &[(&str, &[f64])]) -> EmbeddingTable {
        let vectors = entries
            .iter()
            .map(|(t, v)| (t.to_string(), v.to_vec()))
            .collect();
        EmbeddingTable::new(dim, vectors, 0)
    }

    // ---- cosine ----

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine_similarity(&[0.3, 0.4], &[0.3, 0.4]), 1.0);
        assert!((cosine_similarity(&[1.0, 0.0], &[0.0, 1.0])).abs() < 1e-12);
        assert!((cosine_similarity(&[1.0, 0.0], &[-1.0, 0.0]) + 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        // Bit-identical zero vectors also take the identity shortcut.
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[0.0, 0.0]), 1.0);
    }

    // ---- template_vector ----

    #[test]
    fn template_vector_is_mean_of_content_tokens() {
        let tbl = table(2, &[("a", &[2.0, 0.0]), ("b", &[0.0, 3.0])]);
        let (v, misses) = template_vector(&template(1, &["a"]), &tbl);
        assert_eq!(v, vec![2.0, 0.0]);
        assert_eq!(misses, 0);

        // Multiplicity counts: [a, a, b] → (2·a + b)/3.
        let (v, _) = template_vector(&template(2, &["a", "a", "b"]), &tbl);
        assert!((v[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((v[1] - 1.0).abs() < 1e-12);

        // Wildcards are skipped entirely.
        let (v, _) = template_vector(&template(3, &["a", WILDCARD]), &tbl);
        assert_eq!(v, vec![2.0, 0.0]);
    }

    #[test]
    fn template_vector_symmetry_cancels_to_zero() {
        let tbl = table(2, &[("a", &[1.0, -2.0]), ("b", &[-1.0, 2.0])]);
        let (v, _) = template_vector(&template(1, &["a", "b"]), &tbl);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn template_vector_counts_unseen_tokens_as_misses() {
        let tbl = table(2, &[("a", &[2.0, 0.0])]);
        let (v, misses) = template_vector(&template(1, &["a", "nope"]), &tbl);
        assert_eq!(misses, 1);
        // Unseen token contributes a zero vector but still divides.
        assert_eq!(v, vec![1.0, 0.0]);

        let (v, misses) = template_vector(&template(2, &[WILDCARD]), &tbl);
        assert_eq!(v, vec![0.0, 0.0]);
        assert_eq!(misses, 0);
    }

    // ---- clustering ----

    fn vecmap(entries: &[(TemplateId, Vec<f64>)]) -> BTreeMap<TemplateId, Vec<f64>> {
        entries.iter().cloned().collect()
    }

    #[test]
    fn identical_vectors_merge_orthogonal_do_not() {
        let one = cluster(
            &vecmap(&[(1, vec![1.0, 0.0]), (2, vec![1.0, 0.0])]),
            0.5,
        )
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].members, BTreeSet::from([1, 2]));
        assert_eq!(one[0].average_internal_similarity, 1.0);

        let two = cluster(
            &vecmap(&[(1, vec![1.0, 0.0]), (2, vec![0.0, 1.0])]),
            0.5,
        )
        .unwrap();
        assert_eq!(two.len(), 2);
        assert!(two.iter().all(|p| p.members.len() == 1));
        assert_eq!(two[0].pattern_id, 1);
        assert_eq!(two[1].pattern_id, 2);
    }

    #[test]
    fn cluster_validates_inputs() {
        assert!(matches!(
            cluster(&BTreeMap::new(), 0.5),
            Err(ClusterError::EmptyInput)
        ));
        let v = vecmap(&[(1, vec![1.0, 0.0])]);
        assert!(matches!(
            cluster(&v, 0.0),
            Err(ClusterError::BadThreshold { .. })
        ));
        assert!(matches!(
            cluster(&v, 2.0),
            Err(ClusterError::BadThreshold { .. })
        ));
    }

    /// Independent reference: average linkage computed from scratch each
    /// round as the mean of all cross-cluster pairwise cosine distances
    /// (no Lance–Williams recurrence), same strict-< tie-breaks.
    fn reference_average_linkage(
        vectors: &BTreeMap<TemplateId, Vec<f64>>,
        threshold: f64,
    ) -> Vec<BTreeSet<TemplateId>> {
        let ids: Vec<TemplateId> = vectors.keys().copied().collect();
        let mut groups: Vec<Vec<TemplateId>> = ids.iter().map(|&i| vec![i]).collect();
        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..groups.len() {
                for j in (i + 1)..groups.len() {
                    let mut total = 0.0;
                    for &a in &groups[i] {
                        for &b in &groups[j] {
                            total += 1.0 - cosine_similarity(&vectors[&a], &vectors[&b]);
                        }
                    }
                    let d = total / (groups[i].len() * groups[j].len()) as f64;
                    if best.is_none_or(|(_, _, bd)| d < bd) {
                        best = Some((i, j, d));
                    }
                }
            }
            match best {
                Some((i, j, d)) if d < threshold => {
                    let merged = groups.remove(j);
                    groups[i].extend(merged);
                    // Keep groups ordered by smallest member for the
                    // same tie-break semantics as the implementation.
                    groups.sort_by_key(|g| *g.iter().min().unwrap());
                }
                _ => break,
            }
        }
        groups
            .into_iter()
            .map(|g| g.into_iter().collect())
            .collect()
    }

    #[test]
    fn clustering_matches_brute_force_reference_on_planted_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for round in 0..20 {
            // Two tight groups around orthogonal centers, plus jitter.
            let mut entries = Vec::new();
            let mut planted: Vec<BTreeSet<TemplateId>> = vec![BTreeSet::new(), BTreeSet::new()];
            let mut id = 1;
            for (g, center) in [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0]].iter().enumerate() {
                for _ in 0..3 + (round % 3) {
                    let v: Vec<f64> = center
                        .iter()
                        .map(|c| c + rng.random_range(-0.5..0.5))
                        .collect();
                    entries.push((id, v));
                    planted[g].insert(id);
                    id += 1;
                }
            }
            let vectors = vecmap(&entries);
            let ours = cluster(&vectors, 0.3).unwrap();
            let ours_partition: Vec<BTreeSet<TemplateId>> =
                ours.iter().map(|p| p.members.clone()).collect();
            let reference = reference_average_linkage(&vectors, 0.3);
            assert_eq!(ours_partition, reference, "round {round}");
            assert_eq!(ours_partition, planted, "round {round} planted groups");
        }
    }

    #[test]
    fn clustering_is_deterministic_for_permuted_input() {
        // The map fixes iteration order, so feeding entries in any order
        // must give identical patterns.
        let forward = vecmap(&[
            (1, vec![1.0, 0.1]),
            (2, vec![1.0, 0.2]),
            (3, vec![-0.1, 1.0]),
            (4, vec![0.1, 1.0]),
        ]);
        let mut reversed = BTreeMap::new();
        for (k, v) in forward.iter().rev() {
            reversed.insert(*k, v.clone());
        }
        let a = cluster(&forward, 0.4).unwrap();
        let b = cluster(&reversed, 0.4).unwrap();
        assert_eq!(a, b);
    }

    // ---- representative selection ----

    #[test]
    fn representative_prefers_center_and_breaks_ties_low() {
        // Identical pair: both score 0, the smaller id wins.
        let v = vecmap(&[(5, vec![1.0, 0.0]), (9, vec![1.0, 0.0])]);
        assert_eq!(select_representative(&BTreeSet::from([5, 9]), &v), 5);

        // The mean-direction vector has the minimal average distance.
        let v = vecmap(&[
            (1, vec![1.0, 0.0]),
            (2, vec![1.0, 1.0]),
            (3, vec![0.0, 1.0]),
        ]);
        assert_eq!(select_representative(&BTreeSet::from([1, 2, 3]), &v), 2);

        // Singleton is its own representative.
        let v = vecmap(&[(7, vec![0.0, 2.0])]);
        assert_eq!(select_representative(&BTreeSet::from([7]), &v), 7);
    }

    #[test]
    fn representative_is_never_beaten_by_a_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let ids: Vec<TemplateId> = (1..=6).collect();
            let entries: Vec<(TemplateId, Vec<f64>)> = ids
                .iter()
                .map(|&i| (i, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()))
                .collect();
            let vectors = vecmap(&entries);
            let members: BTreeSet<TemplateId> = ids.iter().copied().collect();
            let chosen = select_representative(&members, &vectors);
            let chosen_score = member_score(chosen, &ids, &vectors);
            for &other in &ids {
                let score = member_score(other, &ids, &vectors);
                assert!(
                    score >= chosen_score - 1e-12,
                    "member {other} score {score} beats representative {chosen} ({chosen_score})"
                );
            }
        }
    }

    // ---- threshold ----

    fn pattern(id: PatternId, avg: f64) -> LogPattern {
        LogPattern {
            pattern_id: id,
            members: BTreeSet::from([id]),
            representative_template: id,
            representative_vector: vec![1.0, 0.0],
            average_internal_similarity: avg,
        }
    }

    #[test]
    fn threshold_is_mean_of_cluster_averages() {
        assert_eq!(compute_threshold(&[pattern(1, 0.8)]).unwrap(), 0.8);
        let two = [pattern(1, 0.9), pattern(2, 0.7)];
        assert!((compute_threshold(&two).unwrap() - 0.8).abs() < 1e-12);
        let singletons = [pattern(1, 1.0), pattern(2, 1.0), pattern(3, 1.0)];
        assert_eq!(compute_threshold(&singletons).unwrap(), 1.0);
        assert!(matches!(
            compute_threshold(&[]),
            Err(ClusterError::EmptyInput)
        ));
    }

    // ---- online assignment ----

    #[test]
    fn online_assignment_joins_creates_and_reserves() {
        let mut patterns = vec![pattern(1, 1.0)];

        // Same direction as the representative → joins, no creation.
        let (id, created) = assign_online(42, &[2.0, 0.0], &mut patterns, 0.9).unwrap();
        assert_eq!((id, created), (1, false));
        assert!(patterns[0].members.contains(&42));

        // Orthogonal to everything → new pattern.
        let (id, created) = assign_online(43, &[0.0, 1.0], &mut patterns, 0.5).unwrap();
        assert_eq!((id, created), (2, true));
        assert_eq!(patterns.len(), 2);
        assert_eq!(patterns[1].representative_template, 43);

        // Zero vector → reserved pattern, list untouched.
        let before = patterns.clone();
        let (id, created) = assign_online(44, &[0.0, 0.0], &mut patterns, 0.5).unwrap();
        assert_eq!((id, created), (UNEMBEDDABLE_PATTERN_ID, false));
        assert_eq!(patterns, before);

        assert!(matches!(
            assign_online(45, &[1.0, 0.0], &mut patterns, 1.5),
            Err(ClusterError::BadThreshold { .. })
        ));
    }

    #[test]
    fn online_boundary_similarity_is_inclusive() {
        let mut patterns = vec![pattern(1, 1.0)]; // representative [1, 0]
        let query = [1.0, 1.0];
        let boundary = cosine_similarity(&query, &patterns[0].representative_vector);

        // θ exactly equal to the achieved similarity → assigned.
        let (id, created) = assign_online(50, &query, &mut patterns, boundary).unwrap();
        assert_eq!((id, created), (1, false));

        // θ one ulp above → new pattern.
        let mut patterns = vec![pattern(1, 1.0)];
        let above = f64::from_bits(boundary.to_bits() + 1);
        let (_, created) = assign_online(51, &query, &mut patterns, above).unwrap();
        assert!(created);
    }

    #[test]
    fn replaying_training_vectors_creates_no_new_patterns() {
        // Offline/online consistency on well-separated groups: exact
        // duplicates give θ = 1.0, and the inclusive boundary means every
        // training vector still lands in its own cluster.
        let vectors = vecmap(&[
            (1, vec![1.0, 0.0, 0.0]),
            (2, vec![1.0, 0.0, 0.0]),
            (3, vec![0.0, 1.0, 0.0]),
            (4, vec![0.0, 1.0, 0.0]),
        ]);
        let mut patterns = cluster(&vectors, 0.5).unwrap();
        let theta = compute_threshold(&patterns).unwrap();
        assert_eq!(theta, 1.0);
        for (&id, vector) in &vectors {
            let (_, created) = assign_online(id, vector, &mut patterns, theta).unwrap();
            assert!(!created, "template {id} split off during replay");
        }
        assert_eq!(patterns.len(), 2);

        // Same property on non-degenerate clusters. Replay consistency is
        // only guaranteed when every member is at least as similar to its
        // representative as θ, so build two fans with identical geometry:
        // a center plus two members at angle ±φ around it. Both clusters
        // then have the same internal average s = cos φ, θ = (s+s)/2 = s
        // exactly, and every replayed member meets the inclusive bound.
        let phi = 0.1f64;
        let vectors = vecmap(&[
            (1, vec![1.0, 0.0]),
            (2, vec![phi.cos(), phi.sin()]),
            (3, vec![phi.cos(), -phi.sin()]),
            (4, vec![0.0, 1.0]),
            (5, vec![phi.sin(), phi.cos()]),
            (6, vec![-phi.sin(), phi.cos()]),
        ]);
        let mut patterns = cluster(&vectors, 0.3).unwrap();
        assert_eq!(patterns.len(), 2);
        assert_eq!(patterns[0].representative_template, 1);
        assert_eq!(patterns[1].representative_template, 4);
        let theta = compute_threshold(&patterns).unwrap();
        assert!(theta > 0.0 && theta < 1.0, "theta {theta} out of (0,1)");
        for (&id, vector) in &vectors {
            let (_, created) = assign_online(id, vector, &mut patterns, theta).unwrap();
            assert!(!created, "template {id} split off during replay");
        }
        assert_eq!(patterns.len(), 2);
    }

    // ---- embeddings ----

    fn sentences(spec: &[(&[&str], usize)]) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for (tokens, reps) in spec {
            for _ in 0..*reps {
                out.push(tokens.iter().map(|t| t.to_string()).collect());
            }
        }
        out
    }

    #[test]
    fn cooccurring_tokens_embed_closer_than_strangers() {
        let corpus = sentences(&[(&["alpha", "beta"], 40), (&["gamma", "delta"], 40)]);
        let config = Word2VecConfig {
            dim: 8,
            epochs: 20,
            seed: 5,
            ..Word2VecConfig::default()
        };
        let tbl = train_embeddings(&corpus, &config).unwrap();
        let a = tbl.vector("alpha").unwrap();
        let b = tbl.vector("beta").unwrap();
        let c = tbl.vector("gamma").unwrap();
        let ab = cosine_similarity(a, b);
        let ac = cosine_similarity(a, c);
        assert!(
            ab > ac,
            "cos(alpha,beta)={ab} should exceed cos(alpha,gamma)={ac}"
        );
    }

    #[test]
    fn same_seed_trains_bit_identical_tables() {
        let corpus = sentences(&[(&["alpha", "beta", "gamma"], 10), (&["beta", "delta"], 5)]);
        let config = Word2VecConfig {
            dim: 8,
            seed: 9,
            ..Word2VecConfig::default()
        };
        let t1 = train_embeddings(&corpus, &config).unwrap();
        let t2 = train_embeddings(&corpus, &config).unwrap();
        for token in ["alpha", "beta", "gamma", "delta"] {
            let v1 = t1.vector(token).unwrap();
            let v2 = t2.vector(token).unwrap();
            let bits1: Vec<u64> = v1.iter().map(|x| x.to_bits()).collect();
            let bits2: Vec<u64> = v2.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits1, bits2, "token {token} differs between runs");
        }
        assert_eq!(t1.corpus_fingerprint(), t2.corpus_fingerprint());

        // A different corpus ordering is a different corpus fingerprint.
        let mut swapped = corpus.clone();
        swapped.swap(0, 14);
        let t3 = train_embeddings(&swapped, &config).unwrap();
        assert_ne!(t1.corpus_fingerprint(), t3.corpus_fingerprint());
    }

    #[test]
    fn embedding_covers_corpus_including_wildcard_and_flags_unseen() {
        let corpus = sentences(&[(&["alpha", WILDCARD, "beta"], 6)]);
        let tbl = train_embeddings(&corpus, &Word2VecConfig::default()).unwrap();
        assert!(tbl.vector(WILDCARD).is_some());
        assert_eq!(tbl.vocabulary_len(), 3);
        let (v, miss) = tbl.lookup("unseen");
        assert!(miss);
        assert_eq!(v, vec![0.0; tbl.dimension()]);
        let (_, miss) = tbl.lookup("alpha");
        assert!(!miss);
    }

    #[test]
    fn degenerate_corpora_are_rejected() {
        let corpus = sentences(&[(&["alpha"], 5)]);
        assert!(matches!(
            train_embeddings(&corpus, &Word2VecConfig::default()),
            Err(ClusterError::NoContextPairs { .. })
        ));
        let corpus = sentences(&[(&["alpha", "beta"], 3)]);
        let config = Word2VecConfig {
            dim: 1,
            ..Word2VecConfig::default()
        };
        assert!(matches!(
            train_embeddings(&corpus, &config),
            Err(ClusterError::BadDimension { dim: 1 })
        ));
    }

    #[test]
    fn tables_and_patterns_roundtrip_through_json() {
        let corpus = sentences(&[(&["alpha", "beta"], 8), (&["gamma", "delta"], 8)]);
        let tbl = train_embeddings(
            &corpus,
            &Word2VecConfig {
                dim: 4,
                ..Word2VecConfig::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&tbl).unwrap();
        let back: EmbeddingTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tbl);

        let p = pattern(3, 0.75);
        let json = serde_json::to_string(&p).unwrap();
        let back: LogPattern = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
