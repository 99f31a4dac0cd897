//! Seasonal period detection.
//!
//! The series is robustly clipped, split into octave detail bands with an
//! undecimated Haar filter, and each band's autocorrelation is scanned for
//! a qualifying peak. Band filtering keeps a slow trend or an isolated
//! level shift from smearing correlation across every lag, which is what
//! defeats a plain ACF scan on raw operations data.

use super::stats::{mad, median, MAD_SCALE, SCALE_FLOOR};

/// Detects the dominant period of `values`.
///
/// Returns the lag (in samples) of the strongest autocorrelation peak of
/// any detail band, provided the peak is a local maximum, is at least
/// `acf_threshold`, and lies in `[2, max_period]`. Returns 0 when no lag
/// qualifies (aperiodic or constant input).
pub fn detect_period(values: &[f64], max_period: usize, acf_threshold: f64) -> usize {
    let n = values.len();
    if n < 8 || max_period < 2 {
        return 0;
    }
    let max_lag = max_period.min(n / 2);
    if max_lag < 2 {
        return 0;
    }

    // Clip at 3 robust sigmas so a handful of wild points cannot bury the
    // correlation structure.
    let med = median(values);
    let sigma = MAD_SCALE * mad(values, med);
    if sigma <= SCALE_FLOOR {
        return 0; // effectively constant
    }
    let lo = med - 3.0 * sigma;
    let hi = med + 3.0 * sigma;
    let clipped: Vec<f64> = values.iter().map(|&v| v.clamp(lo, hi)).collect();

    // Undecimated Haar bands: detail_j[t] = (smooth[t] - smooth[t - 2^(j-1)]) / 2.
    // Each detail series drops its leading edge instead of inventing a
    // boundary rule; levels stop while at least 3/4 of the series remains.
    let mut best: Option<(f64, usize)> = None;
    let mut smooth = clipped;
    let mut shift = 1usize;
    while shift * 4 <= n {
        let m = smooth.len();
        if m <= shift + 8 {
            break;
        }
        let mut detail = Vec::with_capacity(m - shift);
        let mut next_smooth = Vec::with_capacity(m - shift);
        for t in shift..m {
            detail.push((smooth[t] - smooth[t - shift]) * 0.5);
            next_smooth.push((smooth[t] + smooth[t - shift]) * 0.5);
        }
        if let Some((lag, value)) = best_acf_peak(&detail, max_lag, acf_threshold) {
            if best.map_or(true, |(bv, _)| value > bv) {
                best = Some((value, lag));
            }
        }
        smooth = next_smooth;
        shift *= 2;
    }
    // The final smooth band still holds periods longer than the deepest
    // detail; scan it too.
    if smooth.len() >= 8 {
        if let Some((lag, value)) = best_acf_peak(&smooth, max_lag, acf_threshold) {
            if best.map_or(true, |(bv, _)| value > bv) {
                best = Some((value, lag));
            }
        }
    }
    best.map(|(_, lag)| lag).unwrap_or(0)
}

/// Best qualifying ACF peak of one band: a strict interior local maximum at
/// lag in `[2, max_lag]`, value at least `threshold`.
fn best_acf_peak(band: &[f64], max_lag: usize, threshold: f64) -> Option<(usize, f64)> {
    let n = band.len();
    let top = max_lag.min(n.saturating_sub(2));
    if top < 2 {
        return None;
    }
    let mean = band.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = band.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return None;
    }
    // Biased estimator (divisor n): decays with lag, so the fundamental
    // period outranks its own multiples.
    let acf: Vec<f64> = (0..=top + 1)
        .map(|lag| {
            let num: f64 = (lag..n).map(|t| centered[t] * centered[t - lag]).sum();
            num / denom
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for lag in 2..=top {
        let v = acf[lag];
        if v >= threshold && v >= acf[lag - 1] && v >= acf[lag + 1] {
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((lag, v));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sinusoid(n: usize, period: f64, amplitude: f64) -> Vec<f64> {
        (0..n)
            .map(|t| amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin())
            .collect()
    }

    #[test]
    fn clean_sinusoid_period_24() {
        let xs = sinusoid(240, 24.0, 1.0);
        assert_eq!(detect_period(&xs, 64, 0.3), 24);
    }

    #[test]
    fn white_noise_has_no_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..240).map(|_| normal.sample(&mut rng)).collect();
        assert_eq!(detect_period(&xs, 64, 0.5), 0);
    }

    #[test]
    fn constant_series_has_no_period() {
        assert_eq!(detect_period(&[3.0; 128], 32, 0.3), 0);
    }

    #[test]
    fn noisy_sinusoid_still_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let normal = Normal::new(0.0, 0.3).unwrap();
        let xs: Vec<f64> = sinusoid(256, 32.0, 1.0)
            .into_iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect();
        let p = detect_period(&xs, 64, 0.3);
        assert!((31..=33).contains(&p), "got {p}");
    }

    #[test]
    fn outlier_contamination_moves_answer_at_most_one_lag() {
        // Replace 10% of points with 10x outliers; answer stays within ±1.
        let clean = sinusoid(240, 24.0, 1.0);
        let baseline = detect_period(&clean, 64, 0.3);
        assert_eq!(baseline, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut dirty = clean.clone();
        for _ in 0..24 {
            let pos = rand::Rng::random_range(&mut rng, 0..dirty.len());
            let sign = if rand::Rng::random_bool(&mut rng, 0.5) {
                1.0
            } else {
                -1.0
            };
            dirty[pos] = 10.0 * sign;
        }
        let p = detect_period(&dirty, 64, 0.3);
        assert!(
            (baseline as i64 - p as i64).abs() <= 1,
            "baseline {baseline}, contaminated {p}"
        );
    }

    #[test]
    fn trend_plus_season_is_not_mistaken_for_trend_lag() {
        // Linear ramp superimposed on a period-16 wave.
        let xs: Vec<f64> = sinusoid(192, 16.0, 1.0)
            .into_iter()
            .enumerate()
            .map(|(t, v)| v + 0.02 * t as f64)
            .collect();
        assert_eq!(detect_period(&xs, 48, 0.3), 16);
    }

    #[test]
    fn short_input_returns_zero() {
        assert_eq!(detect_period(&[1.0, 2.0, 3.0], 8, 0.3), 0);
    }
}
