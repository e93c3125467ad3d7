//! Core value types shared by all pipeline stages: range axes, frames,
//! classification windows, material labels, feature vectors, and datasets.
//!
//! All types here are immutable after construction and safe to move between
//! threads. Constructors validate invariants and return [`Error`] on misuse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of material classes, including the empty scene.
pub const NUM_CLASSES: usize = 5;

/// Number of per-window features fed to the classifier.
pub const NUM_FEATURES: usize = 6;

/// Discrete distance axis of a radar sweep.
///
/// Bin `i` is centered at `start_mm + i * step_mm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeAxis {
    start_mm: f64,
    step_mm: f64,
    num_bins: usize,
}

impl RangeAxis {
    pub fn new(start_mm: f64, step_mm: f64, num_bins: usize) -> Result<Self> {
        if !start_mm.is_finite() || !step_mm.is_finite() {
            return Err(Error::InvalidConfig("range axis values must be finite".into()));
        }
        if step_mm <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "range axis step must be > 0 mm, got {step_mm}"
            )));
        }
        if num_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "range axis needs at least 2 bins, got {num_bins}"
            )));
        }
        Ok(Self { start_mm, step_mm, num_bins })
    }

    pub fn start_mm(&self) -> f64 {
        self.start_mm
    }

    pub fn step_mm(&self) -> f64 {
        self.step_mm
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    /// Center distance of bin `i` in millimetres.
    pub fn bin_center(&self, i: usize) -> f64 {
        self.start_mm + i as f64 * self.step_mm
    }

    /// Center of the last bin, i.e. the largest representable distance.
    pub fn max_mm(&self) -> f64 {
        self.bin_center(self.num_bins - 1)
    }

    /// Index of the bin whose center is nearest `distance_mm`.
    ///
    /// Ties between two centers resolve to the lower index. Distances outside
    /// `[start, max]` are an error naming the axis bounds.
    pub fn bin_for_distance(&self, distance_mm: f64) -> Result<usize> {
        if !(distance_mm >= self.start_mm && distance_mm <= self.max_mm()) {
            return Err(Error::DistanceOutOfRange {
                distance_mm,
                min_mm: self.start_mm,
                max_mm: self.max_mm(),
            });
        }
        let pos = (distance_mm - self.start_mm) / self.step_mm;
        let lower = pos.floor();
        let frac = pos - lower;
        let idx = if frac > 0.5 { lower + 1.0 } else { lower };
        Ok((idx as usize).min(self.num_bins - 1))
    }

    /// The convention used when no axis is configured: 100 mm to 397.5 mm in
    /// 2.5 mm bins, bracketing a 250 mm standoff with room for both container
    /// surfaces.
    pub fn default_axis() -> Self {
        Self { start_mm: 100.0, step_mm: 2.5, num_bins: 120 }
    }

    /// Re-check invariants, for values that arrived through deserialization.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.start_mm, self.step_mm, self.num_bins).map(|_| ())
    }
}

impl Default for RangeAxis {
    fn default() -> Self {
        Self::default_axis()
    }
}

/// One radar sweep: amplitude per range bin at a single instant.
///
/// Amplitudes are unitless, normalized to full scale 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frame {
    amplitudes: Vec<f64>,
}

impl Frame {
    /// Builds a frame for `axis`, rejecting wrong lengths and negative or
    /// non-finite amplitudes.
    pub fn new(amplitudes: Vec<f64>, axis: &RangeAxis) -> Result<Self> {
        if amplitudes.len() != axis.num_bins() {
            return Err(Error::InvalidFrame(format!(
                "expected {} amplitudes for axis, got {}",
                axis.num_bins(),
                amplitudes.len()
            )));
        }
        for (i, &a) in amplitudes.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidFrame(format!(
                    "amplitude at bin {i} must be finite and >= 0, got {a}"
                )));
            }
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }
}

/// One disc revolution's worth of frames; the unit on which a single
/// prediction is made.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationWindow {
    frames: Vec<Frame>,
    axis: RangeAxis,
}

impl ClassificationWindow {
    /// Builds a window, checking that every frame matches the axis.
    pub fn new(frames: Vec<Frame>, axis: RangeAxis) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidWindow("window needs at least one frame".into()));
        }
        for (k, f) in frames.iter().enumerate() {
            if f.amplitudes().len() != axis.num_bins() {
                return Err(Error::InvalidWindow(format!(
                    "frame {k} has {} bins, axis has {}",
                    f.amplitudes().len(),
                    axis.num_bins()
                )));
            }
        }
        Ok(Self { frames, axis })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn axis(&self) -> &RangeAxis {
        &self.axis
    }

    pub fn frames_per_window(&self) -> usize {
        self.frames.len()
    }
}

/// Container material label. `Empty` denotes no container in the scene.
///
/// Integer codes 0..=4 in declaration order are stable and used for all
/// serialization and confusion-matrix layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialClass {
    Metal,
    Plastic,
    Glass,
    Paper,
    Empty,
}

impl MaterialClass {
    pub const ALL: [MaterialClass; NUM_CLASSES] = [
        MaterialClass::Metal,
        MaterialClass::Plastic,
        MaterialClass::Glass,
        MaterialClass::Paper,
        MaterialClass::Empty,
    ];

    /// Stable integer code, 0..=4 in declaration order.
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Inverse of [`MaterialClass::code`].
    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or(Error::InvalidClassCode(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            MaterialClass::Metal => "metal",
            MaterialClass::Plastic => "plastic",
            MaterialClass::Glass => "glass",
            MaterialClass::Paper => "paper",
            MaterialClass::Empty => "empty",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownClassName(name.to_string()))
    }
}

impl std::fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MaterialClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
    }
}

/// The six per-window statistics fed to the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub main_peak_mean: f64,
    pub secondary_peak_mean: f64,
    pub peak_amplitude_ratio: f64,
    pub main_peak_variance: f64,
    pub secondary_peak_variance: f64,
    pub peak_variance_ratio: f64,
}

impl FeatureVector {
    /// Feature values in declaration order.
    pub fn as_array(&self) -> [f64; NUM_FEATURES] {
        [
            self.main_peak_mean,
            self.secondary_peak_mean,
            self.peak_amplitude_ratio,
            self.main_peak_variance,
            self.secondary_peak_variance,
            self.peak_variance_ratio,
        ]
    }

    pub fn from_array(values: [f64; NUM_FEATURES]) -> Self {
        Self {
            main_peak_mean: values[0],
            secondary_peak_mean: values[1],
            peak_amplitude_ratio: values[2],
            main_peak_variance: values[3],
            secondary_peak_variance: values[4],
            peak_variance_ratio: values[5],
        }
    }

    /// Column names matching [`FeatureVector::as_array`] order.
    pub const COLUMN_NAMES: [&'static str; NUM_FEATURES] = [
        "main_peak_mean",
        "secondary_peak_mean",
        "peak_amplitude_ratio",
        "main_peak_variance",
        "secondary_peak_variance",
        "peak_variance_ratio",
    ];

    /// Checks all six values are finite and non-negative and both ratios lie
    /// in `[0, ratio_clamp]`.
    pub fn validate(&self, ratio_clamp: f64) -> Result<()> {
        for (name, v) in Self::COLUMN_NAMES.iter().zip(self.as_array()) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "feature {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.peak_amplitude_ratio > ratio_clamp || self.peak_variance_ratio > ratio_clamp {
            return Err(Error::InvalidConfig(format!(
                "ratio features must be <= {ratio_clamp}"
            )));
        }
        Ok(())
    }
}

/// Where a dataset came from: the generator seed and a digest of the
/// simulator configuration that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
}

impl Provenance {
    /// Provenance for data that did not come from the simulator.
    pub fn external() -> Self {
        Self { seed: 0, config_digest: "external".to_string() }
    }
}

/// Labeled feature records plus provenance; the training-set unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<(FeatureVector, MaterialClass)>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<(FeatureVector, MaterialClass)>, provenance: Provenance) -> Self {
        Self { records, provenance }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<MaterialClass> {
        self.records.iter().map(|(_, c)| *c).collect()
    }

    /// Record count per class, indexed by class code.
    pub fn label_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0usize; NUM_CLASSES];
        for (_, c) in &self.records {
            counts[c.code() as usize] += 1;
        }
        counts
    }
}
