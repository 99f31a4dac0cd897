//! Scoring diagnosis quality and pooling training data across platforms.
//!
//! The headline numbers: per-fault-type precision (the fraction of that
//! type's test windows diagnosed correctly), their mean, the cover rate
//! (share of types whose precision reaches the coverage threshold), and
//! the harmonic mean of the last two as the composite f1.

use crate::data::{Dataset, Polarity};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty prediction list")]
    EmptyPredictions,
    #[error("pooling needs at least 2 platforms (got {count})")]
    TooFewDatasets { count: usize },
}

/// A fault type counts as covered when at least this fraction of its
/// test windows is diagnosed correctly (inclusive).
pub const COVERAGE_THRESHOLD: f64 = 0.6;

/// Aggregate quality of a batch of diagnoses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// true type → fraction of its windows predicted correctly.
    pub per_type_precision: BTreeMap<String, f64>,
    /// Mean of the per-type precisions.
    pub precision: f64,
    /// |covered types| / |types with test windows|.
    pub cover_rate: f64,
    /// 2·p·c / (p + c); zero when both are zero.
    pub f1: f64,
    pub covered_types: BTreeSet<String>,
    /// true type → predicted type → count.
    pub confusion: BTreeMap<String, BTreeMap<String, u64>>,
    pub sample_count: usize,
}

/// Scores (predicted type, true type) pairs.
pub fn evaluate(predictions: &[(String, String)]) -> Result<EvalReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    let mut correct: BTreeMap<&str, u64> = BTreeMap::new();
    let mut confusion: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for (predicted, truth) in predictions {
        *totals.entry(truth).or_insert(0) += 1;
        if predicted == truth {
            *correct.entry(truth).or_insert(0) += 1;
        }
        *confusion
            .entry(truth.clone())
            .or_default()
            .entry(predicted.clone())
            .or_insert(0) += 1;
    }

    let per_type_precision: BTreeMap<String, f64> = totals
        .iter()
        .map(|(&ty, &total)| {
            let hits = correct.get(ty).copied().unwrap_or(0);
            (ty.to_string(), hits as f64 / total as f64)
        })
        .collect();
    let covered_types: BTreeSet<String> = per_type_precision
        .iter()
        .filter(|&(_, &p)| p >= COVERAGE_THRESHOLD)
        .map(|(ty, _)| ty.clone())
        .collect();

    let type_count = per_type_precision.len() as f64;
    let precision = per_type_precision.values().sum::<f64>() / type_count;
    let cover_rate = covered_types.len() as f64 / type_count;
    let f1 = if precision + cover_rate > 0.0 {
        2.0 * precision * cover_rate / (precision + cover_rate)
    } else {
        0.0
    };

    Ok(EvalReport {
        per_type_precision,
        precision,
        cover_rate,
        f1,
        covered_types,
        confusion,
        sample_count: predictions.len(),
    })
}

/// One platform's training set after pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledPlatform {
    pub dataset: Dataset,
    /// How many failure windows were imported from other platforms.
    pub imported: usize,
    pub warnings: Vec<String>,
}

/// Cross-platform pooling: each platform's training set is augmented
/// with the other platforms' failure windows whose labeled module is in
/// `shared_modules`. Imported windows keep only the features the target
/// platform also has (by exact feature-id match); everything else is
/// dropped, which reads as zero on the target. A donor module with no
/// aligned features at all is skipped with a warning. Test sets are not
/// part of the input and are never touched.
pub fn transfer_pool(
    datasets: &[Dataset],
    shared_modules: &BTreeSet<String>,
) -> Result<Vec<PooledPlatform>, EvalError> {
    if datasets.len() < 2 {
        return Err(EvalError::TooFewDatasets {
            count: datasets.len(),
        });
    }
    let mut pooled = Vec::with_capacity(datasets.len());
    for (target_index, target) in datasets.iter().enumerate() {
        let target_features: BTreeSet<&str> =
            target.feature_ids.iter().map(String::as_str).collect();
        let mut dataset = target.clone();
        let mut imported = 0usize;
        let mut warnings = Vec::new();
        for (donor_index, donor) in datasets.iter().enumerate() {
            if donor_index == target_index {
                continue;
            }
            // Which shared modules does this donor actually have aligned
            // evidence for? A module whose donor windows never set an
            // aligned feature bit would only contribute blank rows.
            let mut module_has_aligned: BTreeMap<&str, bool> = BTreeMap::new();
            for sample in &donor.samples {
                let Some(label) = &sample.label else { continue };
                if sample.polarity != Polarity::Negative
                    || !shared_modules.contains(&label.module_id)
                {
                    continue;
                }
                let entry = module_has_aligned
                    .entry(label.module_id.as_str())
                    .or_insert(false);
                *entry |= sample
                    .features
                    .iter()
                    .any(|(f, &bit)| bit != 0 && target_features.contains(f.as_str()));
            }
            for (module, has_aligned) in &module_has_aligned {
                if !has_aligned {
                    warnings.push(format!(
                        "platform {}: module {} from platform {} has no aligned \
                         features; its windows were skipped",
                        target.platform_id, module, donor.platform_id
                    ));
                }
            }
            for sample in &donor.samples {
                let Some(label) = &sample.label else { continue };
                if sample.polarity != Polarity::Negative
                    || !shared_modules.contains(&label.module_id)
                    || !module_has_aligned
                        .get(label.module_id.as_str())
                        .copied()
                        .unwrap_or(false)
                {
                    continue;
                }
                let mut aligned = sample.clone();
                aligned
                    .features
                    .retain(|f, _| target_features.contains(f.as_str()));
                dataset.samples.push(aligned);
                imported += 1;
            }
        }
        pooled.push(PooledPlatform {
            dataset,
            imported,
            warnings,
        });
    }
    Ok(pooled)
}
