//! Feature construction and selection.
//!
//! The diagnosis network consumes binary evidence bits per sample window:
//! `kpi:<metric>` bits say "this metric was anomalous during the window",
//! `log:<content>` bits say "this log pattern occurred in the window".
//! Log feature names derive from the pattern representative's fixed words
//! (sorted, joined with '-') rather than from pattern numbering, so the
//! same failure signature produces the same feature id on any platform —
//! that is what lets training data transfer across platforms. TF-IDF
//! selection then keeps the features that discriminate between failure
//! types.

use crate::cluster::{LogPattern, PatternId, UNEMBEDDABLE_PATTERN_ID};
use crate::data::{Dataset, PlatformTopology, Polarity, Sample};
use crate::detect::AnomalyReport;
use crate::template::TemplateTree;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("metric {metric_id} has no owning module in the topology")]
    UnownedMetric { metric_id: String },
    #[error("log feature {feature_id} has no owning module in the topology")]
    UnownedPattern { feature_id: String },
    #[error("pattern {pattern_id} has no representative template in the tree")]
    MissingRepresentative { pattern_id: PatternId },
    #[error("selection size must be at least 1")]
    BadSelectionSize,
    #[error("TF-IDF needs at least one labeled failure sample")]
    NoFailureSamples,
}

/// One log record's pattern assignment, placed in time and space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternOccurrence {
    pub ts: i64,
    pub module_id: String,
    pub pattern_id: PatternId,
}

/// A labeled binary feature matrix plus optional selection scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    #[serde(flatten)]
    pub dataset: Dataset,
    /// TF-IDF score per retained feature; present after selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_scores: Option<BTreeMap<String, f64>>,
}

/// Result of matrix construction: the matrix and any coverage warnings
/// (windows that no telemetry touched).
#[derive(Debug, Clone)]
pub struct BuiltMatrix {
    pub matrix: FeatureMatrix,
    pub warnings: Vec<String>,
}

/// The stable feature id of a log pattern: the representative template's
/// non-wildcard tokens, sorted and joined. Content-derived on purpose —
/// see the module docs.
pub fn log_feature_id(pattern: &LogPattern, tree: &TemplateTree) -> Result<String, FeatureError> {
    let template = tree
        .template(pattern.representative_template)
        .ok_or(FeatureError::MissingRepresentative {
            pattern_id: pattern.pattern_id,
        })?;
    let mut tokens: Vec<&str> = template.content_tokens().collect();
    tokens.sort_unstable();
    Ok(format!("log:{}", tokens.join("-")))
}

/// Derives log-feature ownership from where each pattern's occurrences
/// came from: majority module per feature, ties to the lexicographically
/// smallest module. Patterns with no occurrences are omitted.
pub fn infer_pattern_owners(
    patterns: &[LogPattern],
    tree: &TemplateTree,
    occurrences: &[PatternOccurrence],
) -> Result<BTreeMap<String, String>, FeatureError> {
    let mut feature_of_pattern: BTreeMap<PatternId, String> = BTreeMap::new();
    for pattern in patterns {
        feature_of_pattern.insert(pattern.pattern_id, log_feature_id(pattern, tree)?);
    }
    let mut votes: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
    for occ in occurrences {
        if let Some(feature) = feature_of_pattern.get(&occ.pattern_id) {
            *votes
                .entry(feature.as_str())
                .or_default()
                .entry(occ.module_id.as_str())
                .or_insert(0) += 1;
        }
    }
    let mut owners = BTreeMap::new();
    for (feature, tally) in votes {
        // Max count; BTreeMap order makes the smallest module win ties.
        let owner = tally
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(m, _)| (*m).to_string())
            .expect("tally has at least one module");
        owners.insert(feature.to_string(), owner);
    }
    Ok(owners)
}

fn intervals_intersect(a_start: i64, a_end: i64, b_start: i64, b_end: i64) -> bool {
    a_start < b_end && b_start < a_end
}

/// Builds the binary matrix: one row per window, one column per owned
/// metric (`kpi:`) and per log pattern (`log:`). A `kpi:` bit is 1 when
/// an anomalous detection slice for that metric overlaps the window; a
/// `log:` bit is 1 when the pattern occurred inside the window.
/// Occurrences of the reserved unembeddable pattern carry no diagnostic
/// content and set no bit. Windows untouched by any telemetry produce
/// all-zero rows and a warning.
pub fn build_matrix(
    reports: &[AnomalyReport],
    occurrences: &[PatternOccurrence],
    patterns: &[LogPattern],
    tree: &TemplateTree,
    windows: &[Sample],
    topo: &PlatformTopology,
) -> Result<BuiltMatrix, FeatureError> {
    // Columns: every owned metric, then every pattern, in sorted order.
    let mut feature_ids: Vec<String> = topo
        .metric_owner
        .keys()
        .map(|m| format!("kpi:{m}"))
        .collect();
    let mut feature_of_pattern: BTreeMap<PatternId, String> = BTreeMap::new();
    let mut log_features: BTreeSet<String> = BTreeSet::new();
    for pattern in patterns {
        let feature = log_feature_id(pattern, tree)?;
        if !topo.pattern_owner.contains_key(&feature) {
            return Err(FeatureError::UnownedPattern {
                feature_id: feature,
            });
        }
        log_features.insert(feature.clone());
        feature_of_pattern.insert(pattern.pattern_id, feature);
    }
    feature_ids.extend(log_features.into_iter());

    for report in reports {
        if !topo.metric_owner.contains_key(&report.metric_id) {
            return Err(FeatureError::UnownedMetric {
                metric_id: report.metric_id.clone(),
            });
        }
    }

    let mut samples = Vec::with_capacity(windows.len());
    let mut warnings = Vec::new();
    for window in windows {
        let mut features: BTreeMap<String, u8> = BTreeMap::new();
        let mut touched = false;
        for report in reports {
            if !intervals_intersect(
                report.window_start,
                report.window_end,
                window.window_start,
                window.window_end,
            ) {
                continue;
            }
            touched = true;
            if report.is_anomalous() {
                features.insert(format!("kpi:{}", report.metric_id), 1);
            }
        }
        for occ in occurrences {
            if occ.ts < window.window_start || occ.ts >= window.window_end {
                continue;
            }
            touched = true;
            if occ.pattern_id == UNEMBEDDABLE_PATTERN_ID {
                continue;
            }
            if let Some(feature) = feature_of_pattern.get(&occ.pattern_id) {
                features.insert(feature.clone(), 1);
            }
        }
        if !touched {
            warnings.push(format!(
                "window [{}, {}) saw no telemetry; all-zero row",
                window.window_start, window.window_end
            ));
        }
        samples.push(Sample {
            window_start: window.window_start,
            window_end: window.window_end,
            polarity: window.polarity,
            label: window.label.clone(),
            features,
        });
    }

    Ok(BuiltMatrix {
        matrix: FeatureMatrix {
            dataset: Dataset {
                platform_id: topo.platform_id.clone(),
                feature_ids,
                samples,
            },
            selection_scores: None,
        },
        warnings,
    })
}

/// TF-IDF feature selection. Documents are the failure samples grouped by
/// root-cause type: TF(f, t) is the fraction of type t's samples carrying
/// the bit, IDF(f) = ln(T / (1 + types where f appears)) over T types,
/// and a feature's score is max over types of TF·IDF. The top `k`
/// features are kept in their original column order. `k` larger than the
/// feature count returns the matrix unchanged (scores still attached).
pub fn tfidf_select(matrix: &FeatureMatrix, k: usize) -> Result<FeatureMatrix, FeatureError> {
    if k == 0 {
        return Err(FeatureError::BadSelectionSize);
    }
    let dataset = &matrix.dataset;
    let mut groups: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
    for sample in &dataset.samples {
        if sample.polarity == Polarity::Negative {
            if let Some(label) = &sample.label {
                groups.entry(label.type_id.as_str()).or_default().push(sample);
            }
        }
    }
    if groups.is_empty() {
        return Err(FeatureError::NoFailureSamples);
    }
    let type_count = groups.len() as f64;

    let mut scores: Vec<f64> = Vec::with_capacity(dataset.feature_ids.len());
    for feature in &dataset.feature_ids {
        let mut tf: Vec<f64> = Vec::with_capacity(groups.len());
        for samples in groups.values() {
            let hits = samples.iter().filter(|s| s.bit(feature) == 1).count();
            tf.push(hits as f64 / samples.len() as f64);
        }
        let present = tf.iter().filter(|&&t| t > 0.0).count() as f64;
        let idf = (type_count / (1.0 + present)).ln();
        let score = tf
            .iter()
            .map(|t| t * idf)
            .fold(f64::NEG_INFINITY, f64::max);
        scores.push(score);
    }

    // Rank by (score desc, original index asc); keep original order.
    let mut order: Vec<usize> = (0..dataset.feature_ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    let keep: BTreeSet<usize> = order.into_iter().take(k).collect();

    let kept_ids: Vec<String> = dataset
        .feature_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, f)| f.clone())
        .collect();
    let kept_set: BTreeSet<&str> = kept_ids.iter().map(String::as_str).collect();

    let samples: Vec<Sample> = dataset
        .samples
        .iter()
        .map(|s| Sample {
            window_start: s.window_start,
            window_end: s.window_end,
            polarity: s.polarity,
            label: s.label.clone(),
            features: s
                .features
                .iter()
                .filter(|(f, _)| kept_set.contains(f.as_str()))
                .map(|(f, &b)| (f.clone(), b))
                .collect(),
        })
        .collect();

    let selection_scores: BTreeMap<String, f64> = dataset
        .feature_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(i, f)| (f.clone(), scores[i]))
        .collect();

    Ok(FeatureMatrix {
        dataset: Dataset {
            platform_id: dataset.platform_id.clone(),
            feature_ids: kept_ids,
            samples,
        },
        selection_scores: Some(selection_scores),
    })
}
