//! Synthetic telemetry generator with known root causes.
//!
//! Builds whole platforms — seasonal metrics, a log stream, a topology, and
//! labeled observation windows — where every failure window was injected by
//! construction, so downstream stages can be scored against exact ground
//! truth.
//!
//! # Timeline geometry
//!
//! Time is divided into equal segments of [`SEGMENT_SAMPLES`] samples. The
//! second half of each segment is a labeled observation window of
//! [`WINDOW_SAMPLES`] samples; the first half is buffer. Detection slices a
//! window together with one window-length of lookback, i.e. exactly its
//! segment, so the change-point tests (which compare the two halves of the
//! slice) see buffer-vs-window — and an injection confined to the window is
//! visible while neighboring segments stay clean.
//!
//! # Faults
//!
//! A fault window picks one root-cause signature: each affected metric gets
//! the signature's anomaly shape (spikes at [`SPIKE_SIGMA`]·noise, a variance
//! blow-up of [`VARIANCE_FACTOR`]×, a level shift of [`SHIFT_SIGMA`]·noise,
//! or a drift of [`DRIFT_SIGMA_PER_PERIOD`]·noise per season), and the log
//! stream gets a burst of [`BURST_MIN_LINES`]..=[`BURST_MAX_LINES`] lines
//! with freshly randomized variable slots. The burst draws from one of the
//! signature's template families, chosen anew per occurrence, so repeated
//! faults of a type need not share wording.
//!
//! # Chatter
//!
//! Every module emits routine chatter in every segment, and each chatter
//! template is guaranteed one line in the buffer and one in the window.
//! Chatter is therefore always present everywhere — its patterns never
//! distinguish healthy windows from faulty ones.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Label, LogRecord, PlatformTopology, Polarity, Sample, TimeSeries};
use crate::detect::AnomalyKind;

/// Seconds between consecutive metric samples.
pub const SAMPLE_PERIOD_SECONDS: i64 = 60;
/// Length of one labeled observation window, in samples.
pub const WINDOW_SAMPLES: usize = 64;
/// Length of one timeline segment (buffer + window), in samples.
pub const SEGMENT_SAMPLES: usize = 2 * WINDOW_SAMPLES;
/// Seasonal period used by the standard benchmark, in samples. Kept short so
/// a detection slice (two windows) spans many full cycles: the per-phase
/// seasonal medians then rest on dozens of neighbors each, which locks the
/// period estimate and keeps seasonal energy out of the remainder that the
/// dispersion tests compare.
pub const DEFAULT_SEASON_SAMPLES: usize = 4;

/// Spike magnitude, in units of the metric's noise scale.
pub const SPIKE_SIGMA: f64 = 8.0;
/// Number of isolated spikes injected per spike fault. Several spikes give
/// the extreme-value test independent chances even when one spike lands on
/// an opposing noise excursion or shares a seasonal phase with another.
pub const SPIKES_PER_WINDOW: usize = 4;
/// Deviation multiplier for variance faults. Every excursion from the base
/// level — noise and seasonal swing alike — is scaled by this factor, so the
/// seasonal pattern stays detectable inside the fault while the remainder
/// variance grows by the factor squared. Chosen so the dispersion test clears
/// its critical value with margin on every injected fault in the standard
/// benchmark.
pub const VARIANCE_FACTOR: f64 = 4.0;
/// Level-shift magnitude, in units of the metric's noise scale.
pub const SHIFT_SIGMA: f64 = 5.0;
/// Drift slope for trend faults: noise-scale units gained per seasonal period.
pub const DRIFT_SIGMA_PER_PERIOD: f64 = 2.0;
/// Fewest log lines in a fault burst.
pub const BURST_MIN_LINES: usize = 10;
/// Most log lines in a fault burst.
pub const BURST_MAX_LINES: usize = 50;

/// Probability that each burst template variant participates in a given
/// fault's burst (at least one always does).
const VARIANT_KEEP_PROB: f64 = 0.65;
/// Most extra chatter lines per module per segment, on top of the guaranteed
/// one line per chatter template in each segment half.
const CHATTER_EXTRA_MAX_LINES: usize = 4;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("counts must be at least 1 (got {n_normal} normal, {n_faults_per_type} per type)")]
    BadCounts {
        n_normal: usize,
        n_faults_per_type: usize,
    },
    #[error("platform spec declares no modules")]
    NoModules,
    #[error("platform spec declares no fault signatures")]
    NoSignatures,
    #[error("duplicate id {id:?} in platform spec")]
    DuplicateId { id: String },
    #[error("signature {type_id:?} references unknown module {module_id:?}")]
    UnknownModule { type_id: String, module_id: String },
    #[error(
        "signature {type_id:?} affects metric {metric_id:?} not owned by module {module_id:?}"
    )]
    ForeignMetric {
        type_id: String,
        metric_id: String,
        module_id: String,
    },
    #[error("signature {type_id:?} affects no metrics")]
    NoAffectedMetrics { type_id: String },
    #[error(
        "signature {type_id:?} needs at least one burst family, each with at least one template"
    )]
    NoBurstTemplates { type_id: String },
    #[error("metric {metric_id:?}: {field} must be positive")]
    BadMetricSpec { metric_id: String, field: String },
}

/// Shape of one generated metric: a seasonal baseline plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub metric_id: String,
    /// Mean level of the healthy signal.
    pub base_level: f64,
    /// Peak amplitude of the sinusoidal seasonal component.
    pub seasonal_amplitude: f64,
    /// Seasonal period in samples.
    pub period_samples: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_scale: f64,
}

/// One platform module: its metrics and its routine log vocabulary.
///
/// Message templates (chatter and burst alike) are plain text whose `{n}`,
/// `{ip}`, `{hex}`, `{path}`, and `{uuid}` tokens are replaced with freshly
/// randomized values on every emitted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub module_id: String,
    pub metrics: Vec<MetricSpec>,
    /// Routine lines emitted throughout, healthy or not.
    pub chatter_templates: Vec<String>,
}

/// How one root-cause type manifests: which metrics it disturbs, the anomaly
/// shape it imprints on them, and the log lines it bursts with.
///
/// Burst templates are grouped into *families*: each family holds wording
/// variants of one event message, and every fault occurrence draws its whole
/// burst from a single family picked at random. A type with several families
/// shows varying log evidence across occurrences, the way a real fault
/// surfaces through different code paths on different days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSignature {
    pub type_id: String,
    pub module_id: String,
    pub affected_metrics: Vec<String>,
    pub kind: AnomalyKind,
    pub burst_families: Vec<Vec<String>>,
}

/// Full description of one synthetic platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub platform_id: String,
    pub modules: Vec<ModuleSpec>,
    pub signatures: Vec<FaultSignature>,
    /// Directed (from, to): `from` depends on `to`.
    pub dependencies: Vec<(String, String)>,
    pub seed: u64,
}

/// Ground truth for one injected fault window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub window_start: i64,
    pub window_end: i64,
    pub module_id: String,
    pub type_id: String,
    pub kind: AnomalyKind,
    pub affected_metrics: Vec<String>,
}

/// Everything `generate` produces for one platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCorpus {
    pub topology: PlatformTopology,
    pub metrics: Vec<TimeSeries>,
    pub logs: Vec<LogRecord>,
    /// One labeled window per segment, in time order; features are empty.
    pub windows: Vec<Sample>,
    /// Ground truth for each failure window, in time order.
    pub injections: Vec<InjectionRecord>,
}

impl PlatformSpec {
    /// Structural validation: unique ids, positive scales, signatures that
    /// reference declared modules and their own metrics.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.modules.is_empty() {
            return Err(SynthError::NoModules);
        }
        if self.signatures.is_empty() {
            return Err(SynthError::NoSignatures);
        }
        let mut module_ids = BTreeSet::new();
        let mut metric_owner: BTreeMap<&str, &str> = BTreeMap::new();
        for module in &self.modules {
            if !module_ids.insert(module.module_id.as_str()) {
                return Err(SynthError::DuplicateId {
                    id: module.module_id.clone(),
                });
            }
            for metric in &module.metrics {
                if metric_owner
                    .insert(metric.metric_id.as_str(), module.module_id.as_str())
                    .is_some()
                {
                    return Err(SynthError::DuplicateId {
                        id: metric.metric_id.clone(),
                    });
                }
                let positive = [
                    ("noise_scale", metric.noise_scale),
                    ("seasonal_amplitude", metric.seasonal_amplitude),
                    ("period_samples", metric.period_samples as f64),
                ];
                for (field, value) in positive {
                    if !(value > 0.0) || !value.is_finite() {
                        return Err(SynthError::BadMetricSpec {
                            metric_id: metric.metric_id.clone(),
                            field: field.to_string(),
                        });
                    }
                }
                if !metric.base_level.is_finite() {
                    return Err(SynthError::BadMetricSpec {
                        metric_id: metric.metric_id.clone(),
                        field: "base_level".to_string(),
                    });
                }
            }
        }
        let mut type_ids = BTreeSet::new();
        for sig in &self.signatures {
            if !type_ids.insert(sig.type_id.as_str()) {
                return Err(SynthError::DuplicateId {
                    id: sig.type_id.clone(),
                });
            }
            if !module_ids.contains(sig.module_id.as_str()) {
                return Err(SynthError::UnknownModule {
                    type_id: sig.type_id.clone(),
                    module_id: sig.module_id.clone(),
                });
            }
            if sig.affected_metrics.is_empty() {
                return Err(SynthError::NoAffectedMetrics {
                    type_id: sig.type_id.clone(),
                });
            }
            for metric in &sig.affected_metrics {
                if metric_owner.get(metric.as_str()) != Some(&sig.module_id.as_str()) {
                    return Err(SynthError::ForeignMetric {
                        type_id: sig.type_id.clone(),
                        metric_id: metric.clone(),
                        module_id: sig.module_id.clone(),
                    });
                }
            }
            if sig.burst_families.is_empty()
                || sig.burst_families.iter().any(|family| family.is_empty())
            {
                return Err(SynthError::NoBurstTemplates {
                    type_id: sig.type_id.clone(),
                });
            }
        }
        Ok(())
    }

    fn topology(&self) -> PlatformTopology {
        PlatformTopology {
            platform_id: self.platform_id.clone(),
            modules: self.modules.iter().map(|m| m.module_id.clone()).collect(),
            metric_owner: self
                .modules
                .iter()
                .flat_map(|m| {
                    m.metrics
                        .iter()
                        .map(|ms| (ms.metric_id.clone(), m.module_id.clone()))
                })
                .collect(),
            cause_types: self
                .signatures
                .iter()
                .map(|s| (s.type_id.clone(), s.module_id.clone()))
                .collect(),
            module_dependencies: self.dependencies.clone(),
            pattern_owner: BTreeMap::new(),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Replaces `{n}`, `{ip}`, `{hex}`, `{path}`, and `{uuid}` tokens with
/// randomized values; all other tokens pass through unchanged.
fn fill_placeholders(template: &str, rng: &mut ChaCha8Rng) -> String {
    let filled: Vec<String> = template
        .split_whitespace()
        .map(|token| match token {
            "{n}" => rng.random_range(0..100_000_u32).to_string(),
            "{ip}" => format!(
                "{}.{}.{}.{}",
                rng.random_range(1..255_u8),
                rng.random_range(0..=255_u8),
                rng.random_range(0..=255_u8),
                rng.random_range(1..255_u8),
            ),
            "{hex}" => format!("0x{:08x}", rng.random::<u32>()),
            "{path}" => format!(
                "/var/lib/seg{}/part{}",
                rng.random_range(0..64_u32),
                rng.random_range(0..64_u32),
            ),
            "{uuid}" => {
                let a = rng.random::<u64>();
                let b = rng.random::<u64>();
                format!(
                    "{:08x}-{:04x}-{:04x}-{:04x}-{:012x}",
                    (a >> 32) as u32,
                    (a >> 16) & 0xffff,
                    a & 0xffff,
                    (b >> 48) & 0xffff,
                    b & 0xffff_ffff_ffff,
                )
            }
            other => other.to_string(),
        })
        .collect();
    filled.join(" ")
}

/// Generates one platform: `n_normal` healthy windows plus
/// `n_faults_per_type` failure windows for every signature, interleaved in a
/// seed-determined order. Same spec and counts always yield the identical
/// corpus.
pub fn generate(
    spec: &PlatformSpec,
    n_normal: usize,
    n_faults_per_type: usize,
) -> Result<GeneratedCorpus, SynthError> {
    if n_normal < 1 || n_faults_per_type < 1 {
        return Err(SynthError::BadCounts {
            n_normal,
            n_faults_per_type,
        });
    }
    spec.validate()?;

    // Segment plan: which signature (if any) each segment carries.
    let mut plan: Vec<Option<usize>> = vec![None; n_normal];
    for (idx, _) in spec.signatures.iter().enumerate() {
        plan.extend(std::iter::repeat_n(Some(idx), n_faults_per_type));
    }
    let mut plan_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(b"segment-plan"));
    plan.shuffle(&mut plan_rng);

    let n_segments = plan.len();
    let total_samples = n_segments * SEGMENT_SAMPLES;
    let window_seconds = WINDOW_SAMPLES as i64 * SAMPLE_PERIOD_SECONDS;
    let segment_seconds = SEGMENT_SAMPLES as i64 * SAMPLE_PERIOD_SECONDS;

    // Metrics: base signal in one pass per metric, then per-window injections
    // from their own streams so metrics and segments stay independent.
    let mut metrics = Vec::new();
    for module in &spec.modules {
        for ms in &module.metrics {
            let mut rng =
                ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(ms.metric_id.as_bytes()));
            let mut values = Vec::with_capacity(total_samples);
            for t in 0..total_samples {
                let phase = (t % ms.period_samples) as f64 / ms.period_samples as f64;
                let seasonal = ms.seasonal_amplitude * (std::f64::consts::TAU * phase).sin();
                let noise: f64 = rng.sample::<f64, _>(StandardNormal) * ms.noise_scale;
                values.push(ms.base_level + seasonal + noise);
            }
            for (seg, slot) in plan.iter().enumerate() {
                let Some(sig_idx) = slot else { continue };
                let sig = &spec.signatures[*sig_idx];
                if !sig.affected_metrics.contains(&ms.metric_id) {
                    continue;
                }
                let salt = fnv1a(format!("inject:{}:{seg}", ms.metric_id).as_bytes());
                let mut irng = ChaCha8Rng::seed_from_u64(spec.seed ^ salt);
                let w0 = seg * SEGMENT_SAMPLES + WINDOW_SAMPLES;
                let sigma = ms.noise_scale;
                match sig.kind {
                    AnomalyKind::MeanChange => {
                        for v in &mut values[w0..w0 + WINDOW_SAMPLES] {
                            *v += SHIFT_SIGMA * sigma;
                        }
                    }
                    AnomalyKind::LongTrend => {
                        let slope = DRIFT_SIGMA_PER_PERIOD * sigma / ms.period_samples as f64;
                        for off in 0..WINDOW_SAMPLES {
                            values[w0 + off] += slope * off as f64;
                        }
                    }
                    AnomalyKind::VarianceChange => {
                        // The whole deviation from the base level inflates:
                        // both the seasonal swing and the noise grow by the
                        // factor, as when a load amplifier multiplies an
                        // entire signal. Keeping the seasonal shape (only
                        // larger) lets the period stay detectable inside the
                        // fault, while the noise floor still rises by the
                        // factor the dispersion test looks for.
                        for v in &mut values[w0..w0 + WINDOW_SAMPLES] {
                            *v = ms.base_level + VARIANCE_FACTOR * (*v - ms.base_level);
                        }
                    }
                    AnomalyKind::SpikeDip => {
                        let mut offsets = BTreeSet::new();
                        while offsets.len() < SPIKES_PER_WINDOW.min(WINDOW_SAMPLES) {
                            offsets.insert(irng.random_range(0..WINDOW_SAMPLES));
                        }
                        for off in offsets {
                            let sign = if irng.random_bool(0.5) { 1.0 } else { -1.0 };
                            values[w0 + off] += sign * SPIKE_SIGMA * sigma;
                        }
                    }
                }
            }
            metrics.push(TimeSeries {
                metric_id: ms.metric_id.clone(),
                module_id: module.module_id.clone(),
                timestamps: (0..total_samples)
                    .map(|t| t as i64 * SAMPLE_PERIOD_SECONDS)
                    .collect(),
                values,
            });
        }
    }

    // Windows and ground truth, in time order.
    let mut windows = Vec::with_capacity(n_segments);
    let mut injections = Vec::new();
    for (seg, slot) in plan.iter().enumerate() {
        let window_start = seg as i64 * segment_seconds + window_seconds;
        let window_end = (seg as i64 + 1) * segment_seconds;
        let label = slot.map(|sig_idx| {
            let sig = &spec.signatures[sig_idx];
            injections.push(InjectionRecord {
                window_start,
                window_end,
                module_id: sig.module_id.clone(),
                type_id: sig.type_id.clone(),
                kind: sig.kind,
                affected_metrics: sig.affected_metrics.clone(),
            });
            Label {
                module_id: sig.module_id.clone(),
                type_id: sig.type_id.clone(),
            }
        });
        windows.push(Sample {
            window_start,
            window_end,
            polarity: if label.is_some() {
                Polarity::Negative
            } else {
                Polarity::Positive
            },
            label,
            features: BTreeMap::new(),
        });
    }

    // Logs: routine chatter everywhere, plus a burst inside each fault window.
    let mut lrng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(b"log-stream"));
    let mut logs = Vec::new();
    for (seg, slot) in plan.iter().enumerate() {
        let seg_start = seg as i64 * segment_seconds;
        let window_start = seg_start + window_seconds;
        for module in &spec.modules {
            if module.chatter_templates.is_empty() {
                continue;
            }
            // Each chatter template lands once in the buffer and once in the
            // window, then a few extra lines fall anywhere in the segment.
            // Guaranteed presence keeps chatter uninformative: a window never
            // differs from another by which routine messages happened to show.
            for template in &module.chatter_templates {
                for half_start in [seg_start, window_start] {
                    let ts = half_start + lrng.random_range(0..window_seconds);
                    let message = fill_placeholders(template, &mut lrng);
                    logs.push(LogRecord {
                        ts,
                        module_id: module.module_id.clone(),
                        message,
                    });
                }
            }
            let extras = lrng.random_range(0..=CHATTER_EXTRA_MAX_LINES);
            for _ in 0..extras {
                let template =
                    &module.chatter_templates[lrng.random_range(0..module.chatter_templates.len())];
                let ts = seg_start + lrng.random_range(0..segment_seconds);
                let message = fill_placeholders(template, &mut lrng);
                logs.push(LogRecord {
                    ts,
                    module_id: module.module_id.clone(),
                    message,
                });
            }
        }
        if let Some(sig_idx) = slot {
            let sig = &spec.signatures[*sig_idx];
            let family =
                &sig.burst_families[lrng.random_range(0..sig.burst_families.len())];
            let mut kept: Vec<&String> = family
                .iter()
                .filter(|_| lrng.random_bool(VARIANT_KEEP_PROB))
                .collect();
            if kept.is_empty() {
                kept.push(&family[0]);
            }
            let reps = lrng.random_range(BURST_MIN_LINES..=BURST_MAX_LINES);
            for _ in 0..reps {
                let template = kept[lrng.random_range(0..kept.len())];
                let ts = window_start + lrng.random_range(0..window_seconds);
                let message = fill_placeholders(template, &mut lrng);
                logs.push(LogRecord {
                    ts,
                    module_id: sig.module_id.clone(),
                    message,
                });
            }
        }
    }
    logs.sort_by(|a, b| {
        (a.ts, &a.module_id, &a.message).cmp(&(b.ts, &b.module_id, &b.message))
    });

    Ok(GeneratedCorpus {
        topology: spec.topology(),
        metrics,
        logs,
        windows,
        injections,
    })
}

// ---------------------------------------------------------------------------
// Standard three-platform benchmark
// ---------------------------------------------------------------------------

/// Two-syllable vocabulary builder. Syllables avoid the suffixes the message
/// stemmer strips, so every word is its own stem, and each contains letters
/// outside a–f, so none is mistaken for a hex literal.
const SYLLABLES: [&str; 30] = [
    "bal", "cor", "dun", "fen", "gor", "hul", "jan", "kol", "lum", "mer", "nox", "pil", "quo",
    "rim", "tav", "vex", "wyn", "zor", "bem", "fur", "hem", "jil", "kep", "lor", "mun", "nep",
    "pax", "rel", "tor", "vim",
];

fn word(i: usize) -> String {
    format!(
        "{}{}",
        SYLLABLES[(i / SYLLABLES.len()) % SYLLABLES.len()],
        SYLLABLES[i % SYLLABLES.len()]
    )
}

fn word_group(base: usize, len: usize) -> Vec<String> {
    (base..base + len).map(word).collect()
}

/// Builds the burst template variants for one vocabulary group: every variant
/// shares the same fixed words and differs only in how many variable slots
/// trail them, so all variants of a group describe the same event.
fn burst_variants(words: &[String]) -> Vec<String> {
    let head = words.join(" ");
    let slots = ["{n}", "{ip}", "{hex}", "{path}", "{uuid}", "{n}"];
    (1..=slots.len())
        .map(|arity| {
            let tail = slots[..arity].join(" ");
            format!("{head} {tail}")
        })
        .collect()
}

fn chatter_templates(base: usize) -> Vec<String> {
    let a = word_group(base, 3).join(" ");
    let b = word_group(base + 3, 3).join(" ");
    vec![format!("{a} {{n}}"), format!("{b} {{ip}}")]
}

const TYPE_SUFFIXES: [&str; 4] = ["surge", "strain", "lapse", "decay"];

/// Four signatures for one module over its two metrics, following a fixed
/// scheme: two types share burst vocabularies but disturb different metrics;
/// two types disturb both metrics and are told apart only by their bursts.
/// Every type carries two word-disjoint template families, so one occurrence
/// shows one of two wordings. Anomaly kinds rotate by `kind_offset` so all
/// four appear platform-wide.
///
/// A module consumes thirty burst words: six five-word families at offsets
/// 0, 5, 10, 15, 20, and 25 from `word_base`.
fn module_signatures(
    module_id: &str,
    metric_a: &str,
    metric_b: &str,
    word_base: usize,
    kind_offset: usize,
) -> Vec<FaultSignature> {
    let kind = |i: usize| AnomalyKind::ALL[(i + kind_offset) % AnomalyKind::ALL.len()];
    let families = |offset: usize| -> Vec<Vec<String>> {
        [offset, offset + 5]
            .iter()
            .map(|&o| burst_variants(&word_group(word_base + o, 5)))
            .collect()
    };
    let make = |suffix: &str, metrics: Vec<&str>, k: AnomalyKind, burst: Vec<Vec<String>>| {
        FaultSignature {
            type_id: format!("{module_id}.{suffix}"),
            module_id: module_id.to_string(),
            affected_metrics: metrics.into_iter().map(String::from).collect(),
            kind: k,
            burst_families: burst,
        }
    };
    vec![
        make(TYPE_SUFFIXES[0], vec![metric_a], kind(0), families(0)),
        make(TYPE_SUFFIXES[1], vec![metric_b], kind(1), families(0)),
        make(TYPE_SUFFIXES[2], vec![metric_a, metric_b], kind(2), families(10)),
        make(TYPE_SUFFIXES[3], vec![metric_a, metric_b], kind(3), families(20)),
    ]
}

fn metric_spec(metric_id: &str, base_level: f64, noise_scale: f64) -> MetricSpec {
    MetricSpec {
        metric_id: metric_id.to_string(),
        base_level,
        // Strong enough for period detection on healthy slices, small enough
        // that a seasonal fit degraded by an injected fault still leaves the
        // fault's own signature dominant in the remainder.
        seasonal_amplitude: 1.5 * noise_scale,
        period_samples: DEFAULT_SEASON_SAMPLES,
        noise_scale,
    }
}

/// Each module owns a forty-word span: thirty burst words (six families of
/// five, see [`module_signatures`]) then six chatter words, with four spare.
const MODULE_WORD_SPAN: usize = 40;
/// Word offset of a module's chatter vocabulary within its span.
const CHATTER_WORD_OFFSET: usize = 30;

/// The host and network modules every platform shares: same module ids, same
/// metric ids, same root-cause types, same burst vocabularies.
fn shared_modules() -> (Vec<ModuleSpec>, Vec<FaultSignature>) {
    let host = ModuleSpec {
        module_id: "host".to_string(),
        metrics: vec![
            metric_spec("host.cpu", 55.0, 1.2),
            metric_spec("host.mem", 70.0, 1.5),
        ],
        chatter_templates: chatter_templates(CHATTER_WORD_OFFSET),
    };
    let network = ModuleSpec {
        module_id: "network".to_string(),
        metrics: vec![
            metric_spec("network.rtt", 40.0, 1.0),
            metric_spec("network.loss", 5.0, 0.6),
        ],
        chatter_templates: chatter_templates(MODULE_WORD_SPAN + CHATTER_WORD_OFFSET),
    };
    let mut signatures = module_signatures("host", "host.cpu", "host.mem", 0, 0);
    signatures.extend(module_signatures(
        "network",
        "network.rtt",
        "network.loss",
        MODULE_WORD_SPAN,
        1,
    ));
    (vec![host, network], signatures)
}

/// One platform-specific module with its own metrics, vocabulary, and types.
fn own_module(
    module_id: &str,
    word_base: usize,
    base_level: f64,
    kind_offset: usize,
) -> (ModuleSpec, Vec<FaultSignature>) {
    let metric_a = format!("{module_id}.load");
    let metric_b = format!("{module_id}.lag");
    let module = ModuleSpec {
        module_id: module_id.to_string(),
        metrics: vec![
            metric_spec(&metric_a, base_level, 0.9),
            metric_spec(&metric_b, base_level + 12.0, 1.3),
        ],
        chatter_templates: chatter_templates(word_base + CHATTER_WORD_OFFSET),
    };
    let signatures = module_signatures(module_id, &metric_a, &metric_b, word_base, kind_offset);
    (module, signatures)
}

fn platform_spec(platform_id: &str, own: [&str; 3], word_base: usize, seed: u64) -> PlatformSpec {
    let (mut modules, mut signatures) = shared_modules();
    let mut dependencies = vec![("host".to_string(), "network".to_string())];
    for (i, module_id) in own.iter().enumerate() {
        let (module, sigs) = own_module(
            module_id,
            word_base + i * MODULE_WORD_SPAN,
            30.0 + 10.0 * i as f64,
            2 + i,
        );
        modules.push(module);
        signatures.extend(sigs);
        dependencies.push((module_id.to_string(), "host".to_string()));
    }
    PlatformSpec {
        platform_id: platform_id.to_string(),
        modules,
        signatures,
        dependencies,
        seed,
    }
}

/// Detection settings matched to the benchmark geometry: default significance
/// levels, with the period search capped at three seasonal cycles. A detection
/// slice holds two windows; letting the search range up to half that length
/// would leave as few as two samples per phase, and a leave-one-out seasonal
/// fit with two samples per phase can absorb any disturbance symmetrically.
pub fn benchmark_detection_config() -> crate::detect::DetectionConfig {
    crate::detect::DetectionConfig {
        max_period: 3 * DEFAULT_SEASON_SAMPLES,
        ..crate::detect::DetectionConfig::default()
    }
}

/// Per-platform generation counts for [`standard_benchmark`]:
/// (normal windows, fault windows per type), largest platform first.
/// With twenty root-cause types per platform this yields 840/200, 316/80,
/// and 169/40 normal/fault windows respectively.
pub const BENCHMARK_COUNTS: [(usize, usize); 3] = [(840, 10), (316, 4), (169, 2)];

/// Default seed for the standard benchmark. The soundness and false-positive
/// guarantees documented on [`standard_benchmark`] are asserted at this seed.
pub const BENCHMARK_SEED: u64 = 17;

/// Three platforms of descending size. All share the host and network
/// modules — ids, metric names, root-cause types, and burst vocabularies are
/// identical across platforms — while each contributes three modules of its
/// own, for five modules and twenty root-cause types apiece.
pub fn standard_benchmark(seed: u64) -> Vec<GeneratedCorpus> {
    let specs = [
        platform_spec("alpha", ["scheduler", "storage", "compute"], 120, seed ^ fnv1a(b"alpha")),
        platform_spec("beta", ["query", "cache", "meta"], 280, seed ^ fnv1a(b"beta")),
        platform_spec("gamma", ["ingest", "stream", "archive"], 440, seed ^ fnv1a(b"gamma")),
    ];
    specs
        .iter()
        .zip(BENCHMARK_COUNTS)
        .map(|(spec, (n_normal, n_faults))| {
            generate(spec, n_normal, n_faults).expect("benchmark spec is valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{detect_anomalies, DetectionConfig};
    use crate::template::{preprocess, Preprocessed, WILDCARD};

    fn tiny_spec() -> PlatformSpec {
        PlatformSpec {
            platform_id: "test".to_string(),
            modules: vec![ModuleSpec {
                module_id: "db".to_string(),
                metrics: vec![
                    metric_spec("db.qps", 100.0, 1.0),
                    metric_spec("db.lat", 20.0, 0.5),
                ],
                chatter_templates: vec!["balcor dunfen checkpoint {n}".to_string()],
            }],
            signatures: vec![
                FaultSignature {
                    type_id: "db.stall".to_string(),
                    module_id: "db".to_string(),
                    affected_metrics: vec!["db.qps".to_string()],
                    kind: AnomalyKind::MeanChange,
                    burst_families: vec![vec![
                        "gorhul jankol lockup {n}".to_string(),
                        "gorhul jankol lockup {n} {ip}".to_string(),
                    ]],
                },
                FaultSignature {
                    type_id: "db.flood".to_string(),
                    module_id: "db".to_string(),
                    affected_metrics: vec!["db.lat".to_string()],
                    kind: AnomalyKind::SpikeDip,
                    burst_families: vec![vec!["lummer noxpil overrun {hex}".to_string()]],
                },
            ],
            dependencies: vec![],
            seed: 7,
        }
    }

    #[test]
    fn rejects_zero_counts() {
        let spec = tiny_spec();
        assert!(matches!(
            generate(&spec, 0, 1),
            Err(SynthError::BadCounts { .. })
        ));
        assert!(matches!(
            generate(&spec, 1, 0),
            Err(SynthError::BadCounts { .. })
        ));
    }

    #[test]
    fn validation_rejects_malformed_specs() {
        let mut s = tiny_spec();
        s.signatures[0].module_id = "ghost".to_string();
        assert!(matches!(
            s.validate(),
            Err(SynthError::UnknownModule { .. })
        ));

        let mut s = tiny_spec();
        s.signatures[0].affected_metrics = vec!["web.hits".to_string()];
        assert!(matches!(
            s.validate(),
            Err(SynthError::ForeignMetric { .. })
        ));

        let mut s = tiny_spec();
        s.signatures[1].burst_families.clear();
        assert!(matches!(
            s.validate(),
            Err(SynthError::NoBurstTemplates { .. })
        ));

        let mut s = tiny_spec();
        s.signatures[1].burst_families = vec![vec![]];
        assert!(matches!(
            s.validate(),
            Err(SynthError::NoBurstTemplates { .. })
        ));

        let mut s = tiny_spec();
        s.modules[0].metrics[0].noise_scale = 0.0;
        assert!(matches!(
            s.validate(),
            Err(SynthError::BadMetricSpec { .. })
        ));

        let mut s = tiny_spec();
        s.signatures[1].type_id = "db.stall".to_string();
        assert!(matches!(s.validate(), Err(SynthError::DuplicateId { .. })));
    }

    #[test]
    fn corpus_has_expected_shape() {
        let spec = tiny_spec();
        let corpus = generate(&spec, 3, 2).unwrap();

        let n_segments = 3 + 2 * 2;
        assert_eq!(corpus.windows.len(), n_segments);
        assert_eq!(corpus.injections.len(), 4);
        assert_eq!(corpus.metrics.len(), 2);
        for series in &corpus.metrics {
            assert_eq!(series.values.len(), n_segments * SEGMENT_SAMPLES);
            assert!(series
                .timestamps
                .windows(2)
                .all(|pair| pair[0] < pair[1]));
        }

        let window_seconds = WINDOW_SAMPLES as i64 * SAMPLE_PERIOD_SECONDS;
        let mut labeled = 0;
        for (i, sample) in corpus.windows.iter().enumerate() {
            assert_eq!(sample.window_end - sample.window_start, window_seconds);
            if i > 0 {
                assert!(sample.window_start > corpus.windows[i - 1].window_end - 1);
            }
            match sample.polarity {
                Polarity::Negative => {
                    assert!(sample.label.is_some());
                    labeled += 1;
                }
                Polarity::Positive => assert!(sample.label.is_none()),
            }
            assert!(sample.features.is_empty());
        }
        assert_eq!(labeled, 4);

        corpus.topology.validate().unwrap();
        assert_eq!(corpus.topology.cause_types.len(), 2);

        // Every injection matches a labeled window.
        for inj in &corpus.injections {
            let sample = corpus
                .windows
                .iter()
                .find(|w| w.window_start == inj.window_start)
                .unwrap();
            let label = sample.label.as_ref().unwrap();
            assert_eq!(label.type_id, inj.type_id);
            assert_eq!(label.module_id, inj.module_id);
        }
    }

    #[test]
    fn same_seed_reproduces_corpus_exactly() {
        let spec = tiny_spec();
        let a = generate(&spec, 4, 2).unwrap();
        let b = generate(&spec, 4, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );

        let mut other = spec.clone();
        other.seed = 8;
        let c = generate(&other, 4, 2).unwrap();
        assert_ne!(a.metrics, c.metrics);
        assert_ne!(a.logs, c.logs);
    }

    /// A signature that says "metric m, kind k" must produce a window where
    /// the detector reports kind k on metric m, for all four kinds.
    #[test]
    fn injected_faults_are_detected_as_their_kind() {
        let metrics: Vec<MetricSpec> = (0..4)
            .map(|i| metric_spec(&format!("svc.m{i}"), 50.0 + i as f64, 1.0))
            .collect();
        let signatures: Vec<FaultSignature> = AnomalyKind::ALL
            .iter()
            .enumerate()
            .map(|(i, &kind)| FaultSignature {
                type_id: format!("svc.t{i}"),
                module_id: "svc".to_string(),
                affected_metrics: vec![format!("svc.m{i}")],
                kind,
                burst_families: vec![vec![format!(
                    "{} {} fault {{n}}",
                    word(40 + i),
                    word(50 + i)
                )]],
            })
            .collect();
        let spec = PlatformSpec {
            platform_id: "loop".to_string(),
            modules: vec![ModuleSpec {
                module_id: "svc".to_string(),
                metrics,
                chatter_templates: vec![],
            }],
            signatures,
            dependencies: vec![],
            seed: 42,
        };
        let corpus = generate(&spec, 2, 3).unwrap();
        let config = DetectionConfig::default();
        let lookback = WINDOW_SAMPLES as i64 * SAMPLE_PERIOD_SECONDS;

        assert_eq!(corpus.injections.len(), 12);
        for inj in &corpus.injections {
            let metric_id = &inj.affected_metrics[0];
            let series = corpus
                .metrics
                .iter()
                .find(|s| &s.metric_id == metric_id)
                .unwrap();
            let (timestamps, values) =
                series.slice(inj.window_start - lookback, inj.window_end);
            let slice = TimeSeries {
                metric_id: series.metric_id.clone(),
                module_id: series.module_id.clone(),
                timestamps,
                values,
            };
            let report = detect_anomalies(&slice, &config).unwrap();
            assert!(
                report.findings.contains(&inj.kind),
                "{} fault on {} at {} not reported; findings {:?}",
                inj.kind.name(),
                metric_id,
                inj.window_start,
                report.findings,
            );
        }
    }

    #[test]
    fn burst_lines_stay_inside_their_fault_window() {
        let spec = tiny_spec();
        let corpus = generate(&spec, 3, 2).unwrap();
        // "lummer" only occurs in db.flood bursts.
        let flood_windows: Vec<(i64, i64)> = corpus
            .windows
            .iter()
            .filter(|w| {
                w.label.as_ref().map(|l| l.type_id.as_str()) == Some("db.flood")
            })
            .map(|w| (w.window_start, w.window_end))
            .collect();
        assert_eq!(flood_windows.len(), 2);
        let marker_lines: Vec<&LogRecord> = corpus
            .logs
            .iter()
            .filter(|r| r.message.starts_with("lummer"))
            .collect();
        assert!(!marker_lines.is_empty());
        for record in marker_lines {
            assert!(
                flood_windows
                    .iter()
                    .any(|(start, end)| record.ts >= *start && record.ts < *end),
                "burst line at {} outside every db.flood window",
                record.ts
            );
        }
    }

    #[test]
    fn chatter_covers_buffers_and_normal_segments() {
        let spec = tiny_spec();
        let corpus = generate(&spec, 6, 1).unwrap();
        let in_any_window = |ts: i64| {
            corpus
                .windows
                .iter()
                .any(|w| ts >= w.window_start && ts < w.window_end)
        };
        let chatter: Vec<&LogRecord> = corpus
            .logs
            .iter()
            .filter(|r| r.message.starts_with("balcor"))
            .collect();
        assert!(chatter.iter().any(|r| !in_any_window(r.ts)));
        assert!(chatter.iter().any(|r| in_any_window(r.ts)));
    }

    #[test]
    fn placeholder_tokens_mask_to_wildcards() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let line = fill_placeholders("gorhul jankol lockup {n} {ip} {hex} {path} {uuid}", &mut rng);
        match preprocess(&line) {
            Preprocessed::Tokens(tokens) => {
                assert_eq!(
                    tokens,
                    vec!["gorhul", "jankol", "lockup", WILDCARD, WILDCARD, WILDCARD, WILDCARD,
                         WILDCARD]
                );
            }
            Preprocessed::AllVariables => panic!("fixed words vanished"),
        }
    }

    /// Every benchmark vocabulary word must survive preprocessing unchanged:
    /// otherwise a group's variants would stop sharing their fixed text.
    #[test]
    fn benchmark_vocabulary_is_stable_under_preprocessing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for corpus in standard_benchmark(5) {
            let _ = &corpus;
        }
        for spec in [
            platform_spec("alpha", ["scheduler", "storage", "compute"], 120, 1),
            platform_spec("beta", ["query", "cache", "meta"], 280, 2),
            platform_spec("gamma", ["ingest", "stream", "archive"], 440, 3),
        ] {
            for template in spec
                .signatures
                .iter()
                .flat_map(|sig| sig.burst_families.iter().flatten())
            {
                let line = fill_placeholders(template, &mut rng);
                let head: Vec<&str> = template
                    .split_whitespace()
                    .filter(|t| !t.starts_with('{'))
                    .collect();
                match preprocess(&line) {
                    Preprocessed::Tokens(tokens) => {
                        let fixed: Vec<&str> = tokens
                            .iter()
                            .filter(|t| *t != WILDCARD)
                            .map(String::as_str)
                            .collect();
                        assert_eq!(fixed, head, "template {template:?}");
                        let wildcards = tokens.iter().filter(|t| *t == WILDCARD).count();
                        let slots = template
                            .split_whitespace()
                            .filter(|t| t.starts_with('{'))
                            .count();
                        assert_eq!(wildcards, slots, "template {template:?}");
                    }
                    Preprocessed::AllVariables => panic!("no fixed words in {template:?}"),
                }
            }
        }
    }

    #[test]
    fn benchmark_platforms_share_infrastructure_and_shrink_in_size() {
        let corpora = standard_benchmark(17);
        assert_eq!(corpora.len(), 3);
        let ids: Vec<&str> = corpora
            .iter()
            .map(|c| c.topology.platform_id.as_str())
            .collect();
        assert_eq!(ids, vec!["alpha", "beta", "gamma"]);

        for corpus in &corpora {
            corpus.topology.validate().unwrap();
            assert_eq!(corpus.topology.modules.len(), 5);
            // 3..=6 types per module.
            let mut per_module: BTreeMap<&str, usize> = BTreeMap::new();
            for module in corpus.topology.cause_types.values() {
                *per_module.entry(module.as_str()).or_insert(0) += 1;
            }
            assert_eq!(per_module.len(), 5);
            for (&module, &count) in &per_module {
                assert!((3..=6).contains(&count), "{module} has {count} types");
            }
            // All four anomaly shapes appear.
            let kinds: BTreeSet<AnomalyKind> =
                corpus.injections.iter().map(|i| i.kind).collect();
            assert_eq!(kinds.len(), 4);
            // Every type received fault windows.
            let typed: BTreeSet<&str> = corpus
                .injections
                .iter()
                .map(|i| i.type_id.as_str())
                .collect();
            assert_eq!(typed.len(), corpus.topology.cause_types.len());
        }

        // Shared host/network metric ids and type ids across all platforms.
        for shared_metric in ["host.cpu", "host.mem", "network.rtt", "network.loss"] {
            for corpus in &corpora {
                assert!(
                    corpus.metrics.iter().any(|s| s.metric_id == shared_metric),
                    "{shared_metric} missing from {}",
                    corpus.topology.platform_id
                );
            }
        }
        let shared_types = |c: &GeneratedCorpus| -> BTreeSet<String> {
            c.topology
                .cause_types
                .iter()
                .filter(|(_, m)| m.as_str() == "host" || m.as_str() == "network")
                .map(|(t, _)| t.clone())
                .collect()
        };
        let alpha_shared = shared_types(&corpora[0]);
        assert_eq!(alpha_shared.len(), 8);
        assert_eq!(alpha_shared, shared_types(&corpora[1]));
        assert_eq!(alpha_shared, shared_types(&corpora[2]));

        // Strictly shrinking platform sizes.
        let sizes: Vec<usize> = corpora.iter().map(|c| c.windows.len()).collect();
        assert!(sizes[0] > sizes[1] && sizes[1] > sizes[2], "{sizes:?}");

        // Burst vocabularies are distinct across groups within a platform:
        // every family's fixed-word head is unique or shared only with the
        // type's designated partner, and a signature's two families never
        // share a word.
        let spec = platform_spec("alpha", ["scheduler", "storage", "compute"], 120, 1);
        let mut by_head: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for sig in &spec.signatures {
            assert_eq!(sig.burst_families.len(), 2, "{}", sig.type_id);
            let words: Vec<BTreeSet<&str>> = sig
                .burst_families
                .iter()
                .map(|family| {
                    family[0]
                        .split_whitespace()
                        .filter(|t| !t.starts_with('{'))
                        .collect()
                })
                .collect();
            assert!(
                words[0].is_disjoint(&words[1]),
                "{} families share words",
                sig.type_id
            );
            for family in &words {
                let head = family.iter().copied().collect::<Vec<_>>().join(" ");
                by_head.entry(head).or_default().push(sig.type_id.as_str());
            }
        }
        for (head, types) in &by_head {
            assert!(
                types.len() <= 2,
                "burst vocabulary {head:?} shared by {types:?}"
            );
        }
    }

    /// A fault occurrence draws its burst from exactly one family, and across
    /// many occurrences of one type both families get used.
    #[test]
    fn bursts_use_one_family_per_occurrence_and_both_families_over_time() {
        let mut spec = tiny_spec();
        spec.signatures[0].burst_families = vec![
            vec![
                "gorhul jankol lockup {n}".to_string(),
                "gorhul jankol lockup {n} {ip}".to_string(),
            ],
            vec!["quorim tavvex fence {hex}".to_string()],
        ];
        let corpus = generate(&spec, 4, 12).unwrap();
        let stall_windows: Vec<(i64, i64)> = corpus
            .windows
            .iter()
            .filter(|w| w.label.as_ref().map(|l| l.type_id.as_str()) == Some("db.stall"))
            .map(|w| (w.window_start, w.window_end))
            .collect();
        assert_eq!(stall_windows.len(), 12);
        let mut family_seen = [false, false];
        for (start, end) in stall_windows {
            let mut present = [false, false];
            for record in corpus.logs.iter().filter(|r| r.ts >= start && r.ts < end) {
                if record.message.starts_with("gorhul") {
                    present[0] = true;
                }
                if record.message.starts_with("quorim") {
                    present[1] = true;
                }
            }
            assert!(
                present[0] != present[1],
                "window [{start}, {end}) mixes families or has no burst: {present:?}"
            );
            family_seen[0] |= present[0];
            family_seen[1] |= present[1];
        }
        assert!(
            family_seen[0] && family_seen[1],
            "a family never appeared: {family_seen:?}"
        );
    }
}
