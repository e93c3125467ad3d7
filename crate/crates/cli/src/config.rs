//! Pipeline configuration: a TOML file with one section per stage, every
//! field optional, flags overriding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use matclass_core::classifier::TrainConfig;
use matclass_core::domain::RangeAxis;
use matclass_core::evaluation::SplitMode;
use matclass_core::features::FeatureConfig;
use matclass_core::simulator::{ClassCounts, MaterialProfile, SimConfig};

use crate::CliError;

/// Deserializes the `[simulator]` section as a patch on the defaults, so
/// nested tables like `[simulator.profiles.glass]` can name just the fields
/// they change.
fn simulator_from_patch<'de, D>(deserializer: D) -> Result<SimConfig, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let patch = SimPatch::deserialize(deserializer)?;
    patch.apply(SimConfig::default()).map_err(serde::de::Error::custom)
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimPatch {
    axis: AxisPatch,
    frames_per_window: Option<usize>,
    standoff_mm: Option<f64>,
    noise_sigma: Option<f64>,
    pulse_width_bins: Option<f64>,
    modulation_depths: MaterialsPatch<f64>,
    windows_per_container: Option<usize>,
    seed: Option<u64>,
    profiles: MaterialsPatch<ProfilePatch>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AxisPatch {
    start_mm: Option<f64>,
    step_mm: Option<f64>,
    num_bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MaterialsPatch<T> {
    metal: Option<T>,
    plastic: Option<T>,
    glass: Option<T>,
    paper: Option<T>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProfilePatch {
    front_amp_range: Option<(f64, f64)>,
    back_to_front_ratio_range: Option<(f64, f64)>,
    front_var_scale: Option<f64>,
    back_var_scale: Option<f64>,
    overall_scale: Option<f64>,
    radius_range_mm: Option<(f64, f64)>,
}

impl SimPatch {
    fn apply(self, mut config: SimConfig) -> Result<SimConfig, String> {
        config.axis = RangeAxis::new(
            self.axis.start_mm.unwrap_or(config.axis.start_mm()),
            self.axis.step_mm.unwrap_or(config.axis.step_mm()),
            self.axis.num_bins.unwrap_or(config.axis.num_bins()),
        )
        .map_err(|e| e.to_string())?;
        set(&mut config.frames_per_window, self.frames_per_window);
        set(&mut config.standoff_mm, self.standoff_mm);
        set(&mut config.noise_sigma, self.noise_sigma);
        set(&mut config.pulse_width_bins, self.pulse_width_bins);
        set(&mut config.windows_per_container, self.windows_per_container);
        set(&mut config.seed, self.seed);
        set(&mut config.modulation_depths.metal, self.modulation_depths.metal);
        set(&mut config.modulation_depths.plastic, self.modulation_depths.plastic);
        set(&mut config.modulation_depths.glass, self.modulation_depths.glass);
        set(&mut config.modulation_depths.paper, self.modulation_depths.paper);
        for (slot, patch) in [
            (&mut config.profiles.metal, self.profiles.metal),
            (&mut config.profiles.plastic, self.profiles.plastic),
            (&mut config.profiles.glass, self.profiles.glass),
            (&mut config.profiles.paper, self.profiles.paper),
        ] {
            if let Some(p) = patch {
                p.apply(slot);
            }
        }
        Ok(config)
    }
}

impl ProfilePatch {
    fn apply(self, profile: &mut MaterialProfile) {
        set(&mut profile.front_amp_range, self.front_amp_range);
        set(&mut profile.back_to_front_ratio_range, self.back_to_front_ratio_range);
        set(&mut profile.front_var_scale, self.front_var_scale);
        set(&mut profile.back_var_scale, self.back_var_scale);
        set(&mut profile.overall_scale, self.overall_scale);
        set(&mut profile.radius_range_mm, self.radius_range_mm);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Training knobs minus the split, which lives in [`EvaluationSection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub use_class_weights: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            seed: t.seed,
            use_class_weights: t.use_class_weights,
        }
    }
}

/// How held-out data is carved off before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub split_mode: SplitMode,
    pub test_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self { split_mode: t.split_mode, test_fraction: t.test_fraction }
    }
}

/// Default output locations, each overridable by `--out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub windows: PathBuf,
    pub features: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            windows: PathBuf::from("windows.jsonl"),
            features: PathBuf::from("features.csv"),
            model: PathBuf::from("model.json"),
            report: PathBuf::from("report.json"),
        }
    }
}

/// The whole config file. Missing sections and fields take defaults, so an
/// empty file (or no file) is the reference setup.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(deserialize_with = "simulator_from_patch")]
    pub simulator: SimConfig,
    pub counts: ClassCounts,
    pub features: FeatureConfig,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub paths: PathsSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: Self = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        Ok(config)
    }

    /// Loads `path` if given, otherwise defaults; then applies flag
    /// overrides and validates every section.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(seed) = seed {
            config.simulator.seed = seed;
            config.training.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.simulator.validate().map_err(CliError::from_config_error)?;
        self.features.validate().map_err(CliError::from_config_error)?;
        self.train_config().validate().map_err(CliError::from_config_error)?;
        Ok(())
    }

    /// Assembles the trainer's view: section fields plus the split settings.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            test_fraction: self.evaluation.test_fraction,
            learning_rate: self.training.learning_rate,
            beta1: self.training.beta1,
            beta2: self.training.beta2,
            epsilon: self.training.epsilon,
            seed: self.training.seed,
            use_class_weights: self.training.use_class_weights,
            split_mode: self.evaluation.split_mode,
        }
    }
}
