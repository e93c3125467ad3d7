//! Peak-statistic feature extraction.
//!
//! A classification window is reduced to six numbers: the mean and variance
//! of the amplitude at the front-surface (main) and back-surface (secondary)
//! peaks, plus the two ratios between them. Peaks are located once, on the
//! window-mean sweep, and the per-frame statistics are taken at those fixed
//! bins.

use serde::{Deserialize, Serialize};

use crate::domain::{ClassificationWindow, Dataset, FeatureVector, Provenance};
use crate::error::{Error, Result};
use crate::simulator::WindowSet;

/// Parameters of the extraction stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Bins adjacent to the main peak excluded from the secondary search,
    /// so the main pulse's shoulder is never picked as the back reflection.
    pub guard_bins: usize,
    /// Added to ratio denominators; keeps the metal case (true zero back
    /// reflection) finite.
    pub epsilon: f64,
    /// Upper clamp for both ratio features.
    pub ratio_clamp: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { guard_bins: 3, epsilon: 1e-6, ratio_clamp: 1e3 }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "feature epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.ratio_clamp > 0.0 && self.ratio_clamp.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ratio clamp must be finite and > 0, got {}",
                self.ratio_clamp
            )));
        }
        Ok(())
    }
}

/// Detected main (front-surface) and secondary (back-surface) peak bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeakLocations {
    pub main_bin: usize,
    pub secondary_bin: usize,
    pub guard_bins: usize,
}

/// Per-bin arithmetic mean amplitude across the window's frames.
pub fn mean_sweep(window: &ClassificationWindow) -> Vec<f64> {
    let num_bins = window.axis().num_bins();
    let mut sums = vec![0.0f64; num_bins];
    for frame in window.frames() {
        for (s, &a) in sums.iter_mut().zip(frame.amplitudes()) {
            *s += a;
        }
    }
    let n = window.frames_per_window() as f64;
    for s in &mut sums {
        *s /= n;
    }
    sums
}

/// Locates the two peaks on a mean sweep.
///
/// The main bin is the argmax over bins that leave room for a secondary
/// region; the secondary bin is the argmax over bins strictly beyond
/// `main + guard_bins`. The secondary is always searched on the far side
/// because the back of the container is farther from the sensor than the
/// front. Ties resolve to the lower index.
pub fn detect_peaks(mean: &[f64], guard_bins: usize) -> Result<PeakLocations> {
    if mean.len() < guard_bins + 2 {
        return Err(Error::PeakDetection(format!(
            "sweep of {} bins leaves no room for a guard of {} plus a secondary bin",
            mean.len(),
            guard_bins
        )));
    }
    // Restricting the main search to bins with a non-empty far side keeps
    // extraction total on noise-only sweeps whose global maximum can land in
    // the final bins.
    let main_limit = mean.len() - guard_bins - 1;
    let main_bin = argmax_lowest(&mean[..main_limit]);
    let secondary_start = main_bin + guard_bins + 1;
    if secondary_start >= mean.len() {
        return Err(Error::PeakDetection(format!(
            "no bins beyond the guard region after main bin {main_bin}"
        )));
    }
    let secondary_bin = secondary_start + argmax_lowest(&mean[secondary_start..]);
    Ok(PeakLocations { main_bin, secondary_bin, guard_bins })
}

/// Index of the maximum value; ties resolve to the lowest index.
fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Feature values before the ratio clamp is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawFeatures {
    pub main_peak_mean: f64,
    pub secondary_peak_mean: f64,
    pub peak_amplitude_ratio: f64,
    pub main_peak_variance: f64,
    pub secondary_peak_variance: f64,
    pub peak_variance_ratio: f64,
    pub peaks: PeakLocations,
}

/// Extracts the six features from a window.
///
/// Requires at least two frames (the variances are unbiased sample
/// variances). Ratios are `main / (secondary + epsilon)`, clamped to
/// `[0, ratio_clamp]`.
pub fn extract_features(window: &ClassificationWindow, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let raw = extract_features_raw(window, cfg)?;
    Ok(FeatureVector {
        main_peak_mean: raw.main_peak_mean,
        secondary_peak_mean: raw.secondary_peak_mean,
        peak_amplitude_ratio: raw.peak_amplitude_ratio.clamp(0.0, cfg.ratio_clamp),
        main_peak_variance: raw.main_peak_variance,
        secondary_peak_variance: raw.secondary_peak_variance,
        peak_variance_ratio: raw.peak_variance_ratio.clamp(0.0, cfg.ratio_clamp),
    })
}

/// Same as [`extract_features`] but reports pre-clamp ratio values, for
/// diagnostics and cross-checks.
pub fn extract_features_raw(window: &ClassificationWindow, cfg: &FeatureConfig) -> Result<RawFeatures> {
    cfg.validate()?;
    if window.frames_per_window() < 2 {
        return Err(Error::VarianceUndefined(window.frames_per_window()));
    }
    let mean = mean_sweep(window);
    let peaks = detect_peaks(&mean, cfg.guard_bins)?;

    let main_series: Vec<f64> = window
        .frames()
        .iter()
        .map(|f| f.amplitudes()[peaks.main_bin])
        .collect();
    let secondary_series: Vec<f64> = window
        .frames()
        .iter()
        .map(|f| f.amplitudes()[peaks.secondary_bin])
        .collect();

    let main_peak_mean = series_mean(&main_series);
    let secondary_peak_mean = series_mean(&secondary_series);
    let main_peak_variance = sample_variance(&main_series);
    let secondary_peak_variance = sample_variance(&secondary_series);

    Ok(RawFeatures {
        main_peak_mean,
        secondary_peak_mean,
        peak_amplitude_ratio: main_peak_mean / (secondary_peak_mean + cfg.epsilon),
        main_peak_variance,
        secondary_peak_variance,
        peak_variance_ratio: main_peak_variance / (secondary_peak_variance + cfg.epsilon),
        peaks,
    })
}

/// Extracts features from every window of a generated corpus, carrying the
/// corpus provenance over to the resulting dataset.
pub fn extract_dataset(set: &WindowSet, cfg: &FeatureConfig) -> Result<Dataset> {
    let mut records = Vec::with_capacity(set.len());
    for item in &set.items {
        records.push((extract_features(&item.window, cfg)?, item.label));
    }
    Ok(Dataset::new(
        records,
        Provenance { seed: set.seed, config_digest: set.config_digest.clone() },
    ))
}

fn series_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (N-1) sample variance. A constant series is exactly 0.
fn sample_variance(values: &[f64]) -> f64 {
    debug_assert!(values.len() >= 2);
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return 0.0;
    }
    let mean = series_mean(values);
    let ss: f64 = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    ss / (values.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Frame, RangeAxis};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axis(bins: usize) -> RangeAxis {
        RangeAxis::new(100.0, 2.5, bins).unwrap()
    }

    fn window_from_rows(rows: Vec<Vec<f64>>) -> ClassificationWindow {
        let ax = axis(rows[0].len());
        let frames = rows
            .into_iter()
            .map(|r| Frame::new(r, &ax).unwrap())
            .collect();
        ClassificationWindow::new(frames, ax).unwrap()
    }

    fn random_window(rng: &mut ChaCha8Rng, frames: usize, bins: usize) -> ClassificationWindow {
        let rows = (0..frames)
            .map(|_| (0..bins).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        window_from_rows(rows)
    }

    // Independent re-derivation of the peak contract: exhaustive two-pass
    // scan over explicit index loops, no shared helpers.
    fn oracle_detect(mean: &[f64], guard: usize) -> Option<(usize, usize)> {
        if mean.len() < guard + 2 {
            return None;
        }
        let mut main = 0usize;
        for i in 0..mean.len() - guard - 1 {
            if mean[i] > mean[main] {
                main = i;
            }
        }
        let start = main + guard + 1;
        if start >= mean.len() {
            return None;
        }
        let mut secondary = start;
        for i in start..mean.len() {
            if mean[i] > mean[secondary] {
                secondary = i;
            }
        }
        Some((main, secondary))
    }

    // Brute-force recomputation of all six statistics straight from the raw
    // frame series, with its own mean/variance arithmetic.
    fn oracle_features(window: &ClassificationWindow, cfg: &FeatureConfig) -> Option<[f64; 6]> {
        let n = window.frames_per_window();
        let bins = window.axis().num_bins();
        let mut mean = vec![0.0; bins];
        for (b, m) in mean.iter_mut().enumerate() {
            let mut acc = 0.0;
            for f in window.frames() {
                acc += f.amplitudes()[b];
            }
            *m = acc / n as f64;
        }
        let (m, s) = oracle_detect(&mean, cfg.guard_bins)?;
        let stats = |bin: usize| {
            let vals: Vec<f64> = window.frames().iter().map(|f| f.amplitudes()[bin]).collect();
            let mu = vals.iter().sum::<f64>() / n as f64;
            let constant = vals.iter().all(|&v| v == vals[0]);
            let var = if constant {
                0.0
            } else {
                vals.iter().map(|&v| (v - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0)
            };
            (mu, var)
        };
        let (mm, mv) = stats(m);
        let (sm, sv) = stats(s);
        Some([mm, sm, mm / (sm + cfg.epsilon), mv, sv, mv / (sv + cfg.epsilon)])
    }

    #[test]
    fn mean_sweep_of_identical_frames_is_that_frame() {
        let row = vec![0.1, 0.9, 0.4, 0.2, 0.05, 0.0];
        let w = window_from_rows(vec![row.clone(); 30]);
        for (got, want) in mean_sweep(&w).iter().zip(&row) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn mean_sweep_averages_alternating_values() {
        let mut rows = Vec::new();
        for k in 0..30 {
            let v = if k % 2 == 0 { 0.2 } else { 0.4 };
            rows.push(vec![v, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let w = window_from_rows(rows);
        assert_abs_diff_eq!(mean_sweep(&w)[0], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn mean_sweep_matches_per_bin_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_window(&mut rng, 30, 80);
        for (b, &g) in mean_sweep(&w).iter().enumerate() {
            let mut acc = 0.0;
            for f in w.frames().iter().rev() {
                acc += f.amplitudes()[b];
            }
            assert_abs_diff_eq!(g, acc / 30.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn detect_peaks_single_spike_ties_low() {
        let mut mean = vec![0.0; 120];
        mean[40] = 1.0;
        let p = detect_peaks(&mean, 3).unwrap();
        assert_eq!((p.main_bin, p.secondary_bin), (40, 44));
    }

    #[test]
    fn detect_peaks_two_clear_maxima() {
        let mut mean = vec![0.01; 120];
        mean[40] = 0.6;
        mean[70] = 0.3;
        let p = detect_peaks(&mean, 3).unwrap();
        assert_eq!((p.main_bin, p.secondary_bin), (40, 70));
    }

    #[test]
    fn detect_peaks_rejects_short_sweeps() {
        assert!(detect_peaks(&[0.1, 0.2, 0.3, 0.4], 3).is_err());
        assert!(detect_peaks(&[0.1, 0.2, 0.3, 0.4, 0.5], 3).is_ok());
    }

    #[test]
    fn detect_peaks_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let len = rng.random_range(6..150);
            let mean: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let got = detect_peaks(&mean, 3).unwrap();
            let (m, s) = oracle_detect(&mean, 3).unwrap();
            assert_eq!((got.main_bin, got.secondary_bin), (m, s));
        }
    }

    #[test]
    fn constant_two_peak_frames_have_zero_variance() {
        let mut row = vec![0.0; 120];
        row[40] = 0.6;
        row[70] = 0.3;
        let w = window_from_rows(vec![row; 30]);
        let cfg = FeatureConfig::default();
        let fv = extract_features(&w, &cfg).unwrap();
        assert_eq!(fv.main_peak_mean, 0.6);
        assert_eq!(fv.secondary_peak_mean, 0.3);
        assert_eq!(fv.main_peak_variance, 0.0);
        assert_eq!(fv.secondary_peak_variance, 0.0);
        assert_abs_diff_eq!(fv.peak_amplitude_ratio, 2.0, epsilon = 1e-5);
        assert_eq!(fv.peak_variance_ratio, 0.0);
    }

    #[test]
    fn zero_secondary_clamps_amplitude_ratio() {
        // Metal-like window: energy at the front bin only.
        let mut row = vec![0.0; 120];
        row[48] = 0.8;
        let w = window_from_rows(vec![row; 30]);
        let cfg = FeatureConfig::default();
        let fv = extract_features(&w, &cfg).unwrap();
        assert_eq!(fv.secondary_peak_mean, 0.0);
        assert_eq!(fv.peak_amplitude_ratio, cfg.ratio_clamp);
    }

    #[test]
    fn extraction_needs_two_frames() {
        let mut row = vec![0.0; 120];
        row[40] = 0.5;
        let ax = axis(120);
        let w = ClassificationWindow::new(vec![Frame::new(row, &ax).unwrap()], ax.clone()).unwrap();
        assert!(matches!(
            extract_features(&w, &FeatureConfig::default()),
            Err(Error::VarianceUndefined(1))
        ));
    }

    #[test]
    fn features_match_brute_force_oracle() {
        let cfg = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let w = random_window(&mut rng, 30, 100);
            let raw = extract_features_raw(&w, &cfg).unwrap();
            let expected = oracle_features(&w, &cfg).unwrap();
            let got = [
                raw.main_peak_mean,
                raw.secondary_peak_mean,
                raw.peak_amplitude_ratio,
                raw.main_peak_variance,
                raw.secondary_peak_variance,
                raw.peak_variance_ratio,
            ];
            for (g, e) in got.iter().zip(expected) {
                assert_abs_diff_eq!(*g, e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn output_satisfies_feature_invariants() {
        let cfg = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let w = random_window(&mut rng, 30, 60);
            let fv = extract_features(&w, &cfg).unwrap();
            fv.validate(cfg.ratio_clamp).unwrap();
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_frame_order_invariance(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, 12, 40);
            let cfg = FeatureConfig::default();
            let base = extract_features(&w, &cfg).unwrap();
            let base_peaks = extract_features_raw(&w, &cfg).unwrap().peaks;

            let mut frames = w.frames().to_vec();
            frames.reverse();
            frames.rotate_left(3);
            let permuted = ClassificationWindow::new(frames, w.axis().clone()).unwrap();
            let got = extract_features(&permuted, &cfg).unwrap();
            let got_peaks = extract_features_raw(&permuted, &cfg).unwrap().peaks;

            prop_assert_eq!(base_peaks, got_peaks);
            for (a, b) in base.as_array().iter().zip(got.as_array()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn prop_scale_equivariance(seed in 0u64..1000, scale in 0.05f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, 10, 40);
            let cfg = FeatureConfig::default();
            let base = extract_features_raw(&w, &cfg).unwrap();

            let ax = w.axis().clone();
            let frames = w
                .frames()
                .iter()
                .map(|f| {
                    let scaled: Vec<f64> = f.amplitudes().iter().map(|&a| (a * scale).min(1e9)).collect();
                    Frame::new(scaled, &ax).unwrap()
                })
                .collect();
            let scaled = ClassificationWindow::new(frames, ax).unwrap();
            let got = extract_features_raw(&scaled, &cfg).unwrap();

            prop_assert_eq!(base.peaks, got.peaks);
            prop_assert!((got.main_peak_mean - scale * base.main_peak_mean).abs() < 1e-9 * scale.max(1.0));
            prop_assert!((got.secondary_peak_mean - scale * base.secondary_peak_mean).abs() < 1e-9 * scale.max(1.0));
            prop_assert!((got.main_peak_variance - scale * scale * base.main_peak_variance).abs() < 1e-9 * (scale * scale).max(1.0));
            // The ratio denominator carries the unscaled epsilon, so the
            // expectation is built from the scaled means, not by scaling
            // the base ratio.
            let expected_ratio = (scale * base.main_peak_mean)
                / (scale * base.secondary_peak_mean + cfg.epsilon);
            let rel = (got.peak_amplitude_ratio - expected_ratio).abs() / expected_ratio.abs();
            prop_assert!(rel < 1e-9);
        }

        #[test]
        fn prop_secondary_beyond_guard(seed in 0u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let len = rng.random_range(8usize..120);
            let mean: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let guard = rng.random_range(1usize..5);
            if mean.len() >= guard + 2 {
                let p = detect_peaks(&mean, guard).unwrap();
                prop_assert!(p.secondary_bin > p.main_bin + guard);
            }
        }
    }
}
