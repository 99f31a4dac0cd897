//! Metric anomaly detection.
//!
//! A metric window is decomposed into trend + seasonal + remainder, and
//! each anomaly family is tested on the component where it is visible:
//! spikes/dips and variance changes on the remainder, mean shifts and
//! long-running trends on the trend. All tests use robust (median/MAD)
//! estimates so a single fault sample cannot poison its own baseline.
//!
//! Detection is staged: [`prepare_series`] does the significance-level-
//! independent work (period search + decomposition, the expensive part),
//! and [`apply_tests`] runs the four cheap statistical tests. Sweeps over
//! significance levels can reuse one prepared series for many test runs.
//! [`detect_anomalies`] is the one-shot composition of the two.

pub mod decompose;
pub mod period;
pub mod stats;
pub mod window;

pub use decompose::{decompose, l1_trend, Decomposition};
pub use period::detect_period;
pub use stats::{EsdOutcome, MannKendall, MeanTest, VarianceTest};
pub use window::RobustWindow;

use crate::data::TimeSeries;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Errors from detection operations.
#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("input series is empty")]
    EmptyInput,
    #[error("series has {len} points, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("period {period} out of bounds for length {len} (need 2 <= period <= length/2)")]
    BadPeriod { period: usize, len: usize },
    #[error("invalid detection config: {0}")]
    BadConfig(String),
}

/// The four anomaly families a metric window is screened for.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Isolated extreme points in the remainder.
    SpikeDip,
    /// Dispersion change between the two halves of the remainder.
    VarianceChange,
    /// Location shift between the two halves of the trend.
    MeanChange,
    /// Monotone drift across the whole trend.
    LongTrend,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 4] = [
        AnomalyKind::SpikeDip,
        AnomalyKind::VarianceChange,
        AnomalyKind::MeanChange,
        AnomalyKind::LongTrend,
    ];

    /// Stable snake_case name, used as the statistics-map key.
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::SpikeDip => "spike_dip",
            AnomalyKind::VarianceChange => "variance_change",
            AnomalyKind::MeanChange => "mean_change",
            AnomalyKind::LongTrend => "long_trend",
        }
    }
}

impl std::fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One executed test: observed statistic, the decision threshold it was
/// compared against, and the resulting decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: bool,
}

/// Detection result for one metric window.
///
/// Invariant: every kind in `findings` has a `statistics` entry whose
/// decision is true. Tests whose preconditions could not be met (segment
/// too short) simply have no entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub metric_id: String,
    /// First and last timestamp (epoch seconds) of the inspected values.
    pub window_start: i64,
    pub window_end: i64,
    /// Detected seasonal period in samples, 0 when aperiodic.
    pub period: usize,
    /// True when the window was below `min_length`; no tests were run.
    pub too_short: bool,
    pub findings: BTreeSet<AnomalyKind>,
    pub statistics: BTreeMap<String, TestOutcome>,
}

impl AnomalyReport {
    /// True if any anomaly family fired.
    pub fn is_anomalous(&self) -> bool {
        !self.findings.is_empty()
    }
}

/// Tuning knobs for the detection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Significance level for the spike/dip test.
    pub spike_alpha: f64,
    /// Significance level for the variance-change test.
    pub variance_alpha: f64,
    /// Significance level for the mean-change test.
    pub mean_alpha: f64,
    /// Significance level for the long-trend test.
    pub trend_alpha: f64,
    /// Windows shorter than this are marked too short and not tested.
    pub min_length: usize,
    /// Largest candidate seasonal period, in samples.
    pub max_period: usize,
    /// Minimum ACF peak height to accept a period.
    pub acf_threshold: f64,
    /// Upper bound on spikes/dips flagged per window.
    pub esd_max_anomalies: usize,
    /// Total-variation weight of the trend filter (dimensionless; both
    /// objective terms are in data units). Must sit well above ~0.71,
    /// the break-even point at which tracking iid noise point-by-point
    /// becomes as cheap as staying flat: a lower value lets the trend
    /// interpolate part of the noise, zeroing those residuals and
    /// collapsing the remainder's MAD-based scale estimates.
    pub trend_lambda: f64,
    /// Subsampling stride for the trend-based tests; 0 picks
    /// `max(1, len/32)` automatically. The fitted trend is smooth, so
    /// consecutive points are strongly autocorrelated; testing every
    /// point would overstate the effective sample size and flood the
    /// mean/trend tests with false positives.
    pub trend_test_stride: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            spike_alpha: 0.05,
            variance_alpha: 0.05,
            mean_alpha: 0.05,
            trend_alpha: 0.05,
            min_length: 16,
            max_period: 96,
            acf_threshold: 0.3,
            esd_max_anomalies: 5,
            trend_lambda: 3.0,
            trend_test_stride: 0,
        }
    }
}

impl DetectionConfig {
    /// Sets all four significance levels at once.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.spike_alpha = alpha;
        self.variance_alpha = alpha;
        self.mean_alpha = alpha;
        self.trend_alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        for (name, a) in [
            ("spike_alpha", self.spike_alpha),
            ("variance_alpha", self.variance_alpha),
            ("mean_alpha", self.mean_alpha),
            ("trend_alpha", self.trend_alpha),
        ] {
            if !(a > 0.0 && a < 1.0) {
                return Err(DetectError::BadConfig(format!(
                    "{name} must lie in (0, 1), got {a}"
                )));
            }
        }
        if self.min_length < 4 {
            return Err(DetectError::BadConfig(format!(
                "min_length must be at least 4, got {}",
                self.min_length
            )));
        }
        if self.max_period < 2 {
            return Err(DetectError::BadConfig(format!(
                "max_period must be at least 2, got {}",
                self.max_period
            )));
        }
        if !(self.acf_threshold > 0.0 && self.acf_threshold < 1.0) {
            return Err(DetectError::BadConfig(format!(
                "acf_threshold must lie in (0, 1), got {}",
                self.acf_threshold
            )));
        }
        if self.esd_max_anomalies == 0 {
            return Err(DetectError::BadConfig(
                "esd_max_anomalies must be at least 1".into(),
            ));
        }
        if !(self.trend_lambda > 0.0) || !self.trend_lambda.is_finite() {
            return Err(DetectError::BadConfig(format!(
                "trend_lambda must be positive and finite, got {}",
                self.trend_lambda
            )));
        }
        Ok(())
    }
}

/// Significance-level-independent detection state for one metric window:
/// the detected period and the decomposition. Reusable across test runs
/// with different alphas.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    pub metric_id: String,
    pub window_start: i64,
    pub window_end: i64,
    pub too_short: bool,
    pub period: usize,
    pub decomposition: Option<Decomposition>,
}

/// Runs period detection and decomposition for a series.
pub fn prepare_series(
    series: &TimeSeries,
    config: &DetectionConfig,
) -> Result<PreparedSeries, DetectError> {
    config.validate()?;
    let values = &series.values;
    if values.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    let window_start = series.timestamps[0];
    let window_end = *series.timestamps.last().expect("non-empty");

    if values.len() < config.min_length {
        return Ok(PreparedSeries {
            metric_id: series.metric_id.clone(),
            window_start,
            window_end,
            too_short: true,
            period: 0,
            decomposition: None,
        });
    }

    let period = detect_period(values, config.max_period, config.acf_threshold);
    let decomposition = decompose(values, period, config.trend_lambda)?;
    Ok(PreparedSeries {
        metric_id: series.metric_id.clone(),
        window_start,
        window_end,
        too_short: false,
        period,
        decomposition: Some(decomposition),
    })
}

/// Applies the four anomaly tests to a prepared series.
pub fn apply_tests(prepared: &PreparedSeries, config: &DetectionConfig) -> AnomalyReport {
    let mut report = AnomalyReport {
        metric_id: prepared.metric_id.clone(),
        window_start: prepared.window_start,
        window_end: prepared.window_end,
        period: prepared.period,
        too_short: prepared.too_short,
        findings: BTreeSet::new(),
        statistics: BTreeMap::new(),
    };
    let Some(d) = &prepared.decomposition else {
        return report;
    };

    let record = |kind: AnomalyKind, outcome: TestOutcome, report: &mut AnomalyReport| {
        report.statistics.insert(kind.name().to_string(), outcome);
        if outcome.decision {
            report.findings.insert(kind);
        }
    };

    // Each window runs a family of four tests; any false finding poisons
    // the window's feature bit. Splitting each configured level across
    // the family keeps the per-window false-alarm rate at the configured
    // level instead of roughly four times it.
    let family = AnomalyKind::ALL.len() as f64;

    // Spike screen on the remainder at full resolution.
    if let Ok(esd) = stats::generalized_esd(
        &d.remainder,
        config.esd_max_anomalies,
        config.spike_alpha / family,
    ) {
        record(
            AnomalyKind::SpikeDip,
            TestOutcome {
                statistic: esd.statistic,
                threshold: esd.critical,
                decision: !esd.flagged.is_empty(),
            },
            &mut report,
        );
    }

    // Dispersion change between remainder halves. The reference
    // distribution's degrees of freedom shrink for the robust variance
    // estimator's efficiency; raw segment df would overstate how much
    // information each MAD carries.
    let split = d.remainder.len() / 2;
    let variance_alpha = config.variance_alpha / family;
    if let Ok(var) = stats::f_test_variance_scaled(
        &d.remainder[..split],
        &d.remainder[split..],
        variance_alpha,
        stats::MAD_VARIANCE_EFFICIENCY,
    ) {
        record(
            AnomalyKind::VarianceChange,
            TestOutcome {
                statistic: var.statistic,
                threshold: var.critical,
                decision: var.p_value < variance_alpha,
            },
            &mut report,
        );
    }

    // Location and drift tests run on the deseasoned series (trend plus
    // remainder) rather than the bare trend: the fitted trend is a
    // denoised plateau sequence with near-zero internal variation, so a
    // two-sample test on it alone has no honest scale to calibrate
    // against and flags every plateau meander. The deseasoned series
    // carries the same level structure plus the data's real noise.
    let deseasoned: Vec<f64> = d
        .trend
        .iter()
        .zip(&d.remainder)
        .map(|(t, r)| t + r)
        .collect();

    let mean_alpha = config.mean_alpha / family;
    let mid = deseasoned.len() / 2;
    if let Ok(mean) = stats::welch_t_robust(&deseasoned[..mid], &deseasoned[mid..], mean_alpha) {
        record(
            AnomalyKind::MeanChange,
            TestOutcome {
                statistic: mean.statistic,
                threshold: mean.critical,
                decision: mean.p_value < mean_alpha,
            },
            &mut report,
        );
    }

    // Monotone drift over a decorrelating subsample: the residual smooth
    // component leaves short-range correlation that a rank test on every
    // point would mistake for trend.
    let stride = if config.trend_test_stride == 0 {
        (deseasoned.len() / 32).max(1)
    } else {
        config.trend_test_stride
    };
    let sampled: Vec<f64> = deseasoned.iter().copied().step_by(stride).collect();
    if let Ok(mk) = stats::mann_kendall(&sampled) {
        let threshold = stats::z_critical(config.trend_alpha / family);
        record(
            AnomalyKind::LongTrend,
            TestOutcome {
                statistic: mk.z,
                threshold,
                decision: mk.z.abs() > threshold,
            },
            &mut report,
        );
    }

    report
}

/// One-shot detection: period search, decomposition, all four tests.
pub fn detect_anomalies(
    series: &TimeSeries,
    config: &DetectionConfig,
) -> Result<AnomalyReport, DetectError> {
    let prepared = prepare_series(series, config)?;
    Ok(apply_tests(&prepared, config))
}

/// Spike/dip screen on a remainder sequence: flagged indices, ascending.
pub fn test_spikes_dips(
    remainder: &[f64],
    alpha: f64,
    max_anomalies: usize,
) -> Result<Vec<usize>, DetectError> {
    stats::generalized_esd(remainder, max_anomalies, alpha).map(|o| o.flagged)
}

/// Variance-change test between `remainder[..split]` and `remainder[split..]`.
pub fn test_variance_change(
    remainder: &[f64],
    split: usize,
    alpha: f64,
) -> Result<(bool, VarianceTest), DetectError> {
    if split == 0 || split >= remainder.len() {
        return Err(DetectError::BadConfig(format!(
            "split {split} outside sequence of length {}",
            remainder.len()
        )));
    }
    let t = stats::f_test_variance(&remainder[..split], &remainder[split..], alpha)?;
    let decision = t.p_value < alpha;
    Ok((decision, t))
}

/// Mean-change test between `trend[..split]` and `trend[split..]`.
pub fn test_mean_change(
    trend: &[f64],
    split: usize,
    alpha: f64,
) -> Result<(bool, MeanTest), DetectError> {
    if split == 0 || split >= trend.len() {
        return Err(DetectError::BadConfig(format!(
            "split {split} outside sequence of length {}",
            trend.len()
        )));
    }
    let t = stats::welch_t_robust(&trend[..split], &trend[split..], alpha)?;
    let decision = t.p_value < alpha;
    Ok((decision, t))
}

/// Monotone-trend test over a whole trend sequence.
pub fn test_long_trend(trend: &[f64], alpha: f64) -> Result<(bool, MannKendall), DetectError> {
    if trend.len() < 5 {
        return Err(DetectError::TooShort {
            len: trend.len(),
            min: 5,
        });
    }
    let mk = stats::mann_kendall(trend)?;
    let decision = mk.z.abs() > stats::z_critical(alpha);
    Ok((decision, mk))
}
