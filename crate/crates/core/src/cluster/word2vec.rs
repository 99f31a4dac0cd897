//! Minimal deterministic skip-gram word embeddings with negative sampling.
//!
//! Desk-scale corpora (hundreds of templates, small vocabularies) need
//! embeddings that are reproducible bit-for-bit given a seed, which rules
//! out multi-threaded trainers. This is the classic skip-gram objective:
//! for each (center, context) pair inside a fixed window, push the center
//! vector toward the context's output vector and away from a handful of
//! negatives drawn from the unigram distribution raised to the 3/4 power.

use super::{ClusterError, EmbeddingTable};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Training hyperparameters. The defaults are sized for template corpora,
/// not natural language: tiny dimension, short window, enough epochs that
/// co-occurrence structure dominates the random init.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Word2VecConfig {
    /// Embedding dimension (≥ 2).
    pub dim: usize,
    /// Context window radius in tokens.
    pub window: usize,
    /// Full passes over the corpus.
    pub epochs: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    /// Initial learning rate, decayed linearly…
    pub learning_rate_start: f64,
    /// …down to this floor at the end of training.
    pub learning_rate_end: f64,
    /// RNG seed; same seed + same corpus ⇒ bit-identical table.
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            window: 2,
            epochs: 15,
            negatives: 5,
            learning_rate_start: 0.025,
            learning_rate_end: 1e-4,
            seed: 1,
        }
    }
}

/// FNV-1a over the corpus tokens, with separators so token and sentence
/// boundaries matter. Identifies which corpus a table was trained on.
pub(super) fn corpus_fingerprint(corpus: &[Vec<String>]) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    let mut eat = |byte: u8| {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(PRIME);
    };
    for sentence in corpus {
        for token in sentence {
            for &b in token.as_bytes() {
                eat(b);
            }
            eat(0xff);
        }
        eat(0xfe);
    }
    hash
}

/// Trains skip-gram embeddings over token sentences (one sentence per
/// template). Deterministic: single-threaded, seeded RNG, vocabulary in
/// sorted order.
pub fn train_embeddings(
    corpus: &[Vec<String>],
    config: &Word2VecConfig,
) -> Result<EmbeddingTable, ClusterError> {
    if config.dim < 2 {
        return Err(ClusterError::BadDimension { dim: config.dim });
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for sentence in corpus {
        for token in sentence {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let vocab: Vec<&str> = counts.keys().copied().collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    // One pair per (center, in-window context) position, every epoch.
    let window = config.window.max(1);
    let pairs_per_epoch: u64 = corpus
        .iter()
        .map(|s| {
            let n = s.len();
            (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(window);
                    let hi = (i + window).min(n.saturating_sub(1));
                    (hi - lo) as u64
                })
                .sum::<u64>()
        })
        .sum();
    if vocab.len() < 2 || pairs_per_epoch == 0 {
        return Err(ClusterError::NoContextPairs {
            distinct_tokens: vocab.len(),
        });
    }
    let total_pairs = pairs_per_epoch * config.epochs.max(1) as u64;

    // Negative-sampling table: unigram counts^0.75, cumulative for binary
    // search. Sorted vocabulary keeps the table order deterministic.
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut running = 0.0;
    for &token in &vocab {
        running += (counts[token] as f64).powf(0.75);
        cumulative.push(running);
    }
    let weight_total = running;

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<Vec<f64>> = (0..vocab.len())
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-0.5 / dim as f64..0.5 / dim as f64))
                .collect()
        })
        .collect();
    let mut output: Vec<Vec<f64>> = vec![vec![0.0; dim]; vocab.len()];

    let lr_span = config.learning_rate_end - config.learning_rate_start;
    let mut pairs_done = 0u64;
    for _ in 0..config.epochs.max(1) {
        for sentence in corpus {
            let ids: Vec<usize> = sentence.iter().map(|t| index[t.as_str()]).collect();
            for (i, &center) in ids.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(ids.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = ids[j];
                    pairs_done += 1;
                    let progress = (pairs_done.min(total_pairs)) as f64 / total_pairs as f64;
                    let lr = config.learning_rate_start + lr_span * progress;
                    let center_vec = input[center].clone();
                    let mut hidden_grad = vec![0.0; dim];
                    for sample in 0..=config.negatives {
                        let (target, label) = if sample == 0 {
                            (context, 1.0)
                        } else {
                            let r = rng.random::<f64>() * weight_total;
                            let pick = cumulative.partition_point(|&c| c <= r).min(vocab.len() - 1);
                            if pick == context {
                                continue;
                            }
                            (pick, 0.0)
                        };
                        let z: f64 = center_vec
                            .iter()
                            .zip(&output[target])
                            .map(|(a, b)| a * b)
                            .sum();
                        let predicted = 1.0 / (1.0 + (-z).exp());
                        let gradient = (label - predicted) * lr;
                        let out = &mut output[target];
                        for d in 0..dim {
                            hidden_grad[d] += gradient * out[d];
                            out[d] += gradient * center_vec[d];
                        }
                    }
                    let center_mut = &mut input[center];
                    for d in 0..dim {
                        center_mut[d] += hidden_grad[d];
                    }
                }
            }
        }
    }

    let vectors: BTreeMap<String, Vec<f64>> = vocab
        .iter()
        .enumerate()
        .map(|(i, &t)| (t.to_string(), input[i].clone()))
        .collect();
    Ok(EmbeddingTable::new(dim, vectors, corpus_fingerprint(corpus)))
}
