//! Core data types and file formats shared by every pipeline stage.
//!
//! Three raw inputs describe a platform: metric time series (JSON lines),
//! log lines (plain text, one record per line), and a topology file mapping
//! metrics and cause types onto modules. Downstream stages communicate via
//! [`Dataset`] files holding binary feature vectors per sample window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("metric {metric_id} has non-finite value at ts {ts}")]
    NonFiniteValue { metric_id: String, ts: i64 },
    #[error("metric {metric_id} has duplicate timestamp {ts}")]
    DuplicateTimestamp { metric_id: String, ts: i64 },
    #[error("metric {metric_id} owned by unknown module {module_id}")]
    UnknownMetricOwner { metric_id: String, module_id: String },
    #[error("cause type {type_id} mapped to unknown module {module_id}")]
    UnknownTypeOwner { type_id: String, module_id: String },
    #[error("module dependency references unknown module {module_id}")]
    UnknownDependency { module_id: String },
    #[error("sample at window [{start}, {end}] has polarity {polarity} but label {label:?}")]
    LabelPolarityMismatch {
        start: i64,
        end: i64,
        polarity: Polarity,
        label: Option<Label>,
    },
    #[error("sample label references unknown {kind} {id}")]
    UnknownLabel { kind: &'static str, id: String },
    #[error("train_fraction must lie strictly inside (0, 1); got {0}")]
    BadTrainFraction(f64),
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// One metric's evenly-or-unevenly sampled history on a single module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub metric_id: String,
    pub module_id: String,
    /// Epoch seconds, strictly increasing.
    pub timestamps: Vec<i64>,
    /// Same length as `timestamps`; all values finite.
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Values whose timestamp falls in `[start, end)`, with their timestamps.
    pub fn slice(&self, start: i64, end: i64) -> (Vec<i64>, Vec<f64>) {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end);
        (
            self.timestamps[lo..hi].to_vec(),
            self.values[lo..hi].to_vec(),
        )
    }
}

/// One log line: timestamp, emitting module, free-form message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: i64,
    pub module_id: String,
    pub message: String,
}

/// Configuration-management view of a platform: which modules exist, which
/// metrics and cause types belong to them, and which modules depend on which.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformTopology {
    pub platform_id: String,
    pub modules: Vec<String>,
    /// metric_id -> owning module_id
    pub metric_owner: BTreeMap<String, String>,
    /// type_id -> owning module_id
    pub cause_types: BTreeMap<String, String>,
    /// Directed (from, to) pairs between modules.
    pub module_dependencies: Vec<(String, String)>,
    /// log feature_id -> owning module_id; empty until clustering has run.
    #[serde(default)]
    pub pattern_owner: BTreeMap<String, String>,
}

impl PlatformTopology {
    pub fn validate(&self) -> Result<(), DataError> {
        let known: BTreeSet<&str> = self.modules.iter().map(|m| m.as_str()).collect();
        for (metric, module) in &self.metric_owner {
            if !known.contains(module.as_str()) {
                return Err(DataError::UnknownMetricOwner {
                    metric_id: metric.clone(),
                    module_id: module.clone(),
                });
            }
        }
        for (ty, module) in &self.cause_types {
            if !known.contains(module.as_str()) {
                return Err(DataError::UnknownTypeOwner {
                    type_id: ty.clone(),
                    module_id: module.clone(),
                });
            }
        }
        for (a, b) in &self.module_dependencies {
            for m in [a, b] {
                if !known.contains(m.as_str()) {
                    return Err(DataError::UnknownDependency { module_id: m.clone() });
                }
            }
        }
        Ok(())
    }

    /// Types owned by `module`, sorted.
    pub fn types_of(&self, module: &str) -> Vec<&str> {
        self.cause_types
            .iter()
            .filter(|(_, m)| m.as_str() == module)
            .map(|(t, _)| t.as_str())
            .collect()
    }
}

/// Ground-truth label of a failure window.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub module_id: String,
    pub type_id: String,
}

/// Whether a window is healthy operation or a failure.
///
/// Following monitoring convention, healthy windows are "positive" samples
/// and failure windows "negative" ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Positive => write!(f, "positive"),
            Polarity::Negative => write!(f, "negative"),
        }
    }
}

/// One observation window with its binary feature bits.
///
/// `features` may omit keys; a missing key reads as bit 0. Writers emit only
/// the 1-bits to keep files small and diffs readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub window_start: i64,
    pub window_end: i64,
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default)]
    pub features: BTreeMap<String, u8>,
}

impl Sample {
    pub fn bit(&self, feature_id: &str) -> u8 {
        self.features.get(feature_id).copied().unwrap_or(0)
    }

    fn check_polarity(&self) -> Result<(), DataError> {
        let ok = match self.polarity {
            Polarity::Negative => self.label.is_some(),
            Polarity::Positive => self.label.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(DataError::LabelPolarityMismatch {
                start: self.window_start,
                end: self.window_end,
                polarity: self.polarity,
                label: self.label.clone(),
            })
        }
    }
}

/// A labeled feature matrix for one platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub platform_id: String,
    pub feature_ids: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Checks the structural invariants: feature keys are declared, bits are
    /// 0/1, labels are consistent with polarity and (when a topology is
    /// given) reference known modules and types.
    pub fn validate(&self, topo: Option<&PlatformTopology>) -> Result<(), DataError> {
        let declared: BTreeSet<&str> = self.feature_ids.iter().map(|f| f.as_str()).collect();
        for s in &self.samples {
            s.check_polarity()?;
            for (f, &bit) in &s.features {
                if !declared.contains(f.as_str()) {
                    return Err(DataError::UnknownLabel {
                        kind: "feature",
                        id: f.clone(),
                    });
                }
                if bit > 1 {
                    return Err(DataError::UnknownLabel {
                        kind: "feature bit (must be 0/1)",
                        id: format!("{f}={bit}"),
                    });
                }
            }
            if let (Some(label), Some(topo)) = (&s.label, topo) {
                if !topo.modules.contains(&label.module_id) {
                    return Err(DataError::UnknownLabel {
                        kind: "module",
                        id: label.module_id.clone(),
                    });
                }
                if !topo.cause_types.contains_key(&label.type_id) {
                    return Err(DataError::UnknownLabel {
                        kind: "cause type",
                        id: label.type_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Result of [`split_dataset`]: disjoint train/test sets plus warnings about
/// types too thin to stratify.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Stratified train/test split.
///
/// Healthy (positive) samples all go to the training set: they carry no
/// diagnosis label, so holding them out would waste them. Failure samples
/// are split per cause type, `train_fraction` (rounded) of each type into
/// training, deterministically under `seed`. A type with a single failure
/// sample cannot appear on both sides; it goes to training with a warning.
pub fn split_dataset(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitDataset, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadTrainFraction(train_fraction));
    }
    if dataset.samples.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    for s in &dataset.samples {
        s.check_polarity()?;
    }

    let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut train_idx: Vec<usize> = Vec::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        match &s.label {
            Some(label) => by_type.entry(&label.type_id).or_default().push(i),
            None => train_idx.push(i),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut test_idx: Vec<usize> = Vec::new();
    for (type_id, mut idx) in by_type {
        if idx.len() < 2 {
            warnings.push(format!(
                "cause type {type_id} has {} failure sample(s); all assigned to training, type cannot be evaluated",
                idx.len()
            ));
            train_idx.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let k = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        train_idx.extend(&idx[..k]);
        test_idx.extend(&idx[k..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let pick = |idx: &[usize]| Dataset {
        platform_id: dataset.platform_id.clone(),
        feature_ids: dataset.feature_ids.clone(),
        samples: idx.iter().map(|&i| dataset.samples[i].clone()).collect(),
    };
    Ok(SplitDataset {
        train: pick(&train_idx),
        test: pick(&test_idx),
        warnings,
    })
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>, DataError> {
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(BufReader::new(file).lines())
}

fn create_writer(path: &Path) -> Result<BufWriter<fs::File>, DataError> {
    let file = fs::File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| DataError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Deserialize)]
struct MetricRecord {
    metric_id: String,
    module_id: String,
    ts: i64,
    value: f64,
}

#[derive(Serialize)]
struct MetricRecordRef<'a> {
    metric_id: &'a str,
    module_id: &'a str,
    ts: i64,
    value: f64,
}

/// Loads a metrics file (one JSON object per line) and groups records into
/// per-metric series sorted by timestamp.
pub fn load_metrics(path: &Path) -> Result<Vec<TimeSeries>, DataError> {
    let mut grouped: BTreeMap<(String, String), Vec<(i64, f64)>> = BTreeMap::new();
    for (lineno, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MetricRecord =
            serde_json::from_str(&line).map_err(|e| DataError::MalformedLine {
                path: path.display().to_string(),
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        if !rec.value.is_finite() {
            return Err(DataError::NonFiniteValue {
                metric_id: rec.metric_id,
                ts: rec.ts,
            });
        }
        grouped
            .entry((rec.metric_id, rec.module_id))
            .or_default()
            .push((rec.ts, rec.value));
    }

    let mut out = Vec::with_capacity(grouped.len());
    for ((metric_id, module_id), mut points) in grouped {
        points.sort_by_key(|&(t, _)| t);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DataError::DuplicateTimestamp {
                    metric_id,
                    ts: w[0].0,
                });
            }
        }
        out.push(TimeSeries {
            metric_id,
            module_id,
            timestamps: points.iter().map(|&(t, _)| t).collect(),
            values: points.iter().map(|&(_, v)| v).collect(),
        });
    }
    Ok(out)
}

/// Writes metrics as one JSON object per line, the inverse of
/// [`load_metrics`]. Values round-trip exactly.
pub fn save_metrics(series: &[TimeSeries], path: &Path) -> Result<(), DataError> {
    let mut out = create_writer(path)?;
    for s in series {
        for (&ts, &value) in s.timestamps.iter().zip(&s.values) {
            if !value.is_finite() {
                return Err(DataError::NonFiniteValue {
                    metric_id: s.metric_id.clone(),
                    ts,
                });
            }
            let line = serde_json::to_string(&MetricRecordRef {
                metric_id: &s.metric_id,
                module_id: &s.module_id,
                ts,
                value,
            })
            .map_err(|source| DataError::Json {
                path: path.display().to_string(),
                source,
            })?;
            writeln!(out, "{line}").map_err(|source| DataError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
    }
    out.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a plain-text log file: `<ISO8601> <module_id> <message>` per line.
pub fn load_logs(path: &Path) -> Result<Vec<LogRecord>, DataError> {
    let mut out = Vec::new();
    for (lineno, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| DataError::MalformedLine {
            path: path.display().to_string(),
            line: lineno + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.splitn(3, ' ');
        let ts_str = parts.next().ok_or_else(|| malformed("missing timestamp"))?;
        let module = parts.next().ok_or_else(|| malformed("missing module id"))?;
        let message = parts.next().ok_or_else(|| malformed("missing message"))?;
        let ts = chrono::DateTime::parse_from_rfc3339(ts_str)
            .map_err(|e| malformed(&format!("bad timestamp {ts_str:?}: {e}")))?
            .timestamp();
        out.push(LogRecord {
            ts,
            module_id: module.to_string(),
            message: message.to_string(),
        });
    }
    Ok(out)
}

/// Writes logs as `<ISO8601> <module_id> <message>` lines, the inverse of
/// [`load_logs`]. Rejects records that could not be parsed back: module ids
/// with whitespace, messages with line breaks, out-of-range timestamps.
pub fn save_logs(logs: &[LogRecord], path: &Path) -> Result<(), DataError> {
    let mut out = create_writer(path)?;
    for (i, rec) in logs.iter().enumerate() {
        let malformed = |reason: String| DataError::MalformedLine {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        if rec.module_id.is_empty() || rec.module_id.contains(char::is_whitespace) {
            return Err(malformed(format!(
                "module id {:?} is not a single token",
                rec.module_id
            )));
        }
        if rec.message.contains('\n') || rec.message.contains('\r') {
            return Err(malformed("message contains a line break".to_string()));
        }
        let ts = chrono::DateTime::from_timestamp(rec.ts, 0)
            .ok_or_else(|| malformed(format!("timestamp {} is out of range", rec.ts)))?;
        writeln!(
            out,
            "{} {} {}",
            ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            rec.module_id,
            rec.message
        )
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    out.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a topology file.
pub fn load_topology(path: &Path) -> Result<PlatformTopology, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let topo: PlatformTopology =
        serde_json::from_str(&text).map_err(|source| DataError::Json {
            path: path.display().to_string(),
            source,
        })?;
    topo.validate()?;
    Ok(topo)
}

/// Validates and writes a topology file, the inverse of [`load_topology`].
pub fn save_topology(topo: &PlatformTopology, path: &Path) -> Result<(), DataError> {
    topo.validate()?;
    write_json(path, topo)
}

/// Loads and validates a dataset file.
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ds: Dataset = serde_json::from_str(&text).map_err(|source| DataError::Json {
        path: path.display().to_string(),
        source,
    })?;
    ds.validate(None)?;
    Ok(ds)
}

/// Validates and writes a dataset file, the inverse of [`load_dataset`].
/// Explicit zero bits are dropped on the way out: a missing key already
/// reads as 0, and omitting them keeps files small and diffs readable.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    ds.validate(None)?;
    let lean = Dataset {
        platform_id: ds.platform_id.clone(),
        feature_ids: ds.feature_ids.clone(),
        samples: ds
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
                    .filter(|&(_, &bit)| bit != 0)
                    .map(|(k, &bit)| (k.clone(), bit))
                    .collect(),
            })
            .collect(),
    };
    write_json(path, &lean)
}
