//! Synthetic sweep generation: a rotating container on a disc in front of
//! a short-range radar, reduced to two truncated Gaussian pulses (front and
//! back wall) whose heights wobble with rotation angle, plus sensor noise.
//!
//! Every random quantity comes from a generator derived from the master
//! seed, the class, and the window or container ordinal, so regenerating
//! any subset of a dataset reproduces it bit for bit.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{ClassificationWindow, Frame, MaterialClass, RangeAxis};
use crate::error::{Error, Result};
use crate::seed::{derive_rng, stream};

/// Amplitude ceiling after which the receiver saturates.
pub const FULL_SCALE: f64 = 1.0;

/// Half-width of a wall pulse in bins; amplitudes further from the pulse
/// center are exactly zero. Kept at the default guard width so peak
/// statistics never mix the two walls.
pub const PULSE_SUPPORT_BINS: usize = 3;

/// Container radii the disc can physically hold, in millimeters.
pub const RADIUS_BOUNDS_MM: (f64, f64) = (10.0, 60.0);

/// Phase offset of the back-wall height wobble relative to the front wall.
const BACK_WALL_PHASE_RAD: f64 = 0.9;

/// One value per non-empty material class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerMaterial<T> {
    pub metal: T,
    pub plastic: T,
    pub glass: T,
    pub paper: T,
}

impl<T> PerMaterial<T> {
    pub fn get(&self, class: MaterialClass) -> Result<&T> {
        match class {
            MaterialClass::Metal => Ok(&self.metal),
            MaterialClass::Plastic => Ok(&self.plastic),
            MaterialClass::Glass => Ok(&self.glass),
            MaterialClass::Paper => Ok(&self.paper),
            MaterialClass::Empty => Err(Error::InvalidMaterial(
                "an empty scene has no material properties".into(),
            )),
        }
    }
}

/// Reflection behavior of one material, as ranges the per-container
/// sampler draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialProfile {
    /// Front-wall reflectivity range before `overall_scale`.
    pub front_amp_range: (f64, f64),
    /// Back-wall reflectivity as a fraction of the front wall's.
    pub back_to_front_ratio_range: (f64, f64),
    /// Multiplier on the rotation wobble of the front-wall height.
    pub front_var_scale: f64,
    /// Multiplier on the rotation wobble of the back-wall height.
    pub back_var_scale: f64,
    /// Attenuation applied to both walls.
    pub overall_scale: f64,
    /// Container radius range in millimeters.
    pub radius_range_mm: (f64, f64),
}

impl MaterialProfile {
    fn validate(&self, name: &str) -> Result<()> {
        let ranges = [
            ("front_amp_range", self.front_amp_range, 0.0, 1.0),
            ("back_to_front_ratio_range", self.back_to_front_ratio_range, 0.0, 1.0),
            (
                "radius_range_mm",
                self.radius_range_mm,
                RADIUS_BOUNDS_MM.0,
                RADIUS_BOUNDS_MM.1,
            ),
        ];
        for (field, (lo, hi), min, max) in ranges {
            if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < min || hi > max {
                return Err(Error::InvalidMaterial(format!(
                    "{name}.{field} must be an ordered range within [{min}, {max}], got ({lo}, {hi})"
                )));
            }
        }
        for (field, v) in [
            ("front_var_scale", self.front_var_scale),
            ("back_var_scale", self.back_var_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidMaterial(format!(
                    "{name}.{field} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.overall_scale > 0.0 && self.overall_scale <= 1.0) {
            return Err(Error::InvalidMaterial(format!(
                "{name}.overall_scale must be in (0, 1], got {}",
                self.overall_scale
            )));
        }
        Ok(())
    }
}

fn default_profiles() -> PerMaterial<MaterialProfile> {
    PerMaterial {
        // A metal wall reflects almost everything, so nothing reaches the
        // back wall and only the front pulse appears.
        metal: MaterialProfile {
            front_amp_range: (0.70, 0.95),
            back_to_front_ratio_range: (0.0, 0.0),
            front_var_scale: 1.0,
            back_var_scale: 0.0,
            overall_scale: 1.0,
            radius_range_mm: (25.0, 35.0),
        },
        plastic: MaterialProfile {
            front_amp_range: (0.35, 0.60),
            back_to_front_ratio_range: (0.60, 0.95),
            front_var_scale: 1.0,
            back_var_scale: 1.0,
            overall_scale: 1.0,
            radius_range_mm: (15.0, 50.0),
        },
        // Glass overlaps plastic in amplitude but its wall heights wobble
        // about twice as much with rotation.
        glass: MaterialProfile {
            front_amp_range: (0.30, 0.70),
            back_to_front_ratio_range: (0.20, 0.90),
            front_var_scale: 2.0,
            back_var_scale: 2.0,
            overall_scale: 1.0,
            radius_range_mm: (20.0, 40.0),
        },
        paper: MaterialProfile {
            front_amp_range: (0.10, 0.30),
            back_to_front_ratio_range: (0.30, 0.80),
            front_var_scale: 1.0,
            back_var_scale: 1.0,
            overall_scale: 0.5,
            radius_range_mm: (20.0, 45.0),
        },
    }
}

/// Everything that determines the synthetic data, and nothing else.
/// Serialized form feeds the provenance digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub axis: RangeAxis,
    pub frames_per_window: usize,
    pub standoff_mm: f64,
    /// Scale of the half-normal per-bin sensor noise; 0 disables noise.
    pub noise_sigma: f64,
    /// Gaussian sigma of a wall pulse, in bins.
    pub pulse_width_bins: f64,
    /// Rotation-wobble depth per material, multiplied by the profile's
    /// per-wall variability scales.
    pub modulation_depths: PerMaterial<f64>,
    /// Consecutive windows that share one sampled container.
    pub windows_per_container: usize,
    pub seed: u64,
    pub profiles: PerMaterial<MaterialProfile>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            axis: RangeAxis::default(),
            frames_per_window: 30,
            standoff_mm: 250.0,
            noise_sigma: 0.01,
            pulse_width_bins: 2.0,
            // Small depths on purpose: the weakest containers' rotation
            // wobble sits near the sensor-noise floor, which is what makes
            // a sliver of plastic and glass genuinely ambiguous.
            modulation_depths: PerMaterial {
                metal: 0.02,
                plastic: 0.03,
                glass: 0.032,
                paper: 0.03,
            },
            windows_per_container: 20,
            seed: 7,
            profiles: default_profiles(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.axis.validate()?;
        if self.frames_per_window < 2 {
            return Err(Error::InvalidConfig(format!(
                "frames_per_window must be at least 2, got {}",
                self.frames_per_window
            )));
        }
        if self.windows_per_container == 0 {
            return Err(Error::InvalidConfig(
                "windows_per_container must be at least 1".into(),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.pulse_width_bins > 0.0 && self.pulse_width_bins.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pulse_width_bins must be finite and > 0, got {}",
                self.pulse_width_bins
            )));
        }
        for class in [
            MaterialClass::Metal,
            MaterialClass::Plastic,
            MaterialClass::Glass,
            MaterialClass::Paper,
        ] {
            let name = class.name();
            let profile = self.profiles.get(class)?;
            profile.validate(name)?;
            let depth = *self.modulation_depths.get(class)?;
            if !(0.0..1.0).contains(&depth) {
                return Err(Error::InvalidConfig(format!(
                    "modulation depth for {name} must be in [0, 1), got {depth}"
                )));
            }
            // The largest container of this material must keep both walls
            // on the axis.
            let max_radius = profile.radius_range_mm.1;
            for surface_mm in [self.standoff_mm - max_radius, self.standoff_mm + max_radius] {
                self.axis.bin_for_distance(surface_mm).map_err(|_| {
                    Error::Geometry(format!(
                        "a {name} container of radius {max_radius} mm puts a wall at \
                         {surface_mm} mm, outside the axis [{}, {}] mm",
                        self.axis.start_mm(),
                        self.axis.max_mm()
                    ))
                })?;
            }
        }
        Ok(())
    }
}

/// One physical container put on the disc: fixed geometry and wall
/// reflectivities shared by all of its windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainerSpec {
    pub material: MaterialClass,
    pub radius_mm: f64,
    pub front_reflectivity: f64,
    pub back_reflectivity: f64,
}

impl ContainerSpec {
    pub fn validate(&self, config: &SimConfig) -> Result<()> {
        if self.material == MaterialClass::Empty {
            return Err(Error::InvalidMaterial(
                "a container cannot be of class empty".into(),
            ));
        }
        if !(self.radius_mm >= RADIUS_BOUNDS_MM.0 && self.radius_mm <= RADIUS_BOUNDS_MM.1) {
            return Err(Error::Geometry(format!(
                "radius {} mm outside [{}, {}] mm",
                self.radius_mm, RADIUS_BOUNDS_MM.0, RADIUS_BOUNDS_MM.1
            )));
        }
        for r in [self.front_reflectivity, self.back_reflectivity] {
            if !r.is_finite() || !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidMaterial(format!(
                    "reflectivity must be in [0, 1], got {r}"
                )));
            }
        }
        for surface_mm in [
            config.standoff_mm - self.radius_mm,
            config.standoff_mm + self.radius_mm,
        ] {
            config.axis.bin_for_distance(surface_mm).map_err(|_| {
                Error::Geometry(format!(
                    "container wall at {surface_mm} mm is off the axis [{}, {}] mm",
                    config.axis.start_mm(),
                    config.axis.max_mm()
                ))
            })?;
        }
        Ok(())
    }
}

/// Windows to generate per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassCounts {
    pub metal: usize,
    pub plastic: usize,
    pub glass: usize,
    pub paper: usize,
    pub empty: usize,
}

impl ClassCounts {
    pub fn uniform(per_class: usize) -> Self {
        Self {
            metal: per_class,
            plastic: per_class,
            glass: per_class,
            paper: per_class,
            empty: per_class,
        }
    }

    pub fn total(&self) -> usize {
        self.metal + self.plastic + self.glass + self.paper + self.empty
    }

    pub fn for_class(&self, class: MaterialClass) -> usize {
        match class {
            MaterialClass::Metal => self.metal,
            MaterialClass::Plastic => self.plastic,
            MaterialClass::Glass => self.glass,
            MaterialClass::Paper => self.paper,
            MaterialClass::Empty => self.empty,
        }
    }
}

impl Default for ClassCounts {
    fn default() -> Self {
        Self::uniform(400)
    }
}

/// A generated window with its label and the ordinal of the container it
/// was recorded from (empty windows get a group ordinal the same way).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub window: ClassificationWindow,
    pub label: MaterialClass,
    pub container: u32,
}

/// A full generated corpus plus the provenance needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub items: Vec<LabeledWindow>,
    pub seed: u64,
    pub config_digest: String,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn draw_range<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws one container of the given material from its profile ranges.
pub fn sample_container<R: Rng>(
    config: &SimConfig,
    class: MaterialClass,
    rng: &mut R,
) -> Result<ContainerSpec> {
    let profile = config.profiles.get(class)?;
    let radius_mm = draw_range(rng, profile.radius_range_mm);
    let front_reflectivity = draw_range(rng, profile.front_amp_range) * profile.overall_scale;
    let back_reflectivity = front_reflectivity * draw_range(rng, profile.back_to_front_ratio_range);
    let spec = ContainerSpec {
        material: class,
        radius_mm,
        front_reflectivity,
        back_reflectivity,
    };
    spec.validate(config)?;
    Ok(spec)
}

/// Smooth, non-sinusoidal height wobble over rotation angle, in [-1, 1].
fn rotation_wobble(angle: f64) -> f64 {
    (angle.cos() + 0.5 * (2.0 * angle + 1.3).cos() + 0.25 * (3.0 * angle + 0.7).cos()) / 1.75
}

fn add_pulse(amplitudes: &mut [f64], center_bin: usize, height: f64, sigma_bins: f64) {
    let support = PULSE_SUPPORT_BINS as i64;
    let denom = 2.0 * sigma_bins * sigma_bins;
    for offset in -support..=support {
        let bin = center_bin as i64 + offset;
        if bin < 0 || bin >= amplitudes.len() as i64 {
            continue;
        }
        let off = offset as f64;
        amplitudes[bin as usize] += height * (-off * off / denom).exp();
    }
}

/// Renders one sweep of the scene at the given rotation angle.
///
/// `container: None` produces an empty-scene sweep of pure noise. With
/// noise disabled, bins outside the two pulse supports are exactly zero.
pub fn simulate_frame<R: Rng>(
    config: &SimConfig,
    container: Option<&ContainerSpec>,
    angle: f64,
    rng: &mut R,
) -> Result<Frame> {
    let mut amplitudes = vec![0.0; config.axis.num_bins()];

    if let Some(spec) = container {
        let profile = config.profiles.get(spec.material)?;
        let depth = *config.modulation_depths.get(spec.material)?;
        let front_bin = config.axis.bin_for_distance(config.standoff_mm - spec.radius_mm)?;
        let back_bin = config.axis.bin_for_distance(config.standoff_mm + spec.radius_mm)?;

        let front_height = spec.front_reflectivity
            * (1.0 + depth * profile.front_var_scale * rotation_wobble(angle));
        let back_height = spec.back_reflectivity
            * (1.0 + depth * profile.back_var_scale * rotation_wobble(angle + BACK_WALL_PHASE_RAD));
        add_pulse(&mut amplitudes, front_bin, front_height.max(0.0), config.pulse_width_bins);
        add_pulse(&mut amplitudes, back_bin, back_height.max(0.0), config.pulse_width_bins);
    }

    if config.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, config.noise_sigma)
            .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
        for a in &mut amplitudes {
            *a += noise.sample(rng).abs();
        }
    }

    for a in &mut amplitudes {
        *a = a.clamp(0.0, FULL_SCALE);
    }
    Frame::new(amplitudes, &config.axis)
}

/// Renders one revolution: `frames_per_window` sweeps at evenly spaced
/// rotation angles.
pub fn simulate_window<R: Rng>(
    config: &SimConfig,
    container: Option<&ContainerSpec>,
    rng: &mut R,
) -> Result<ClassificationWindow> {
    let n = config.frames_per_window;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        frames.push(simulate_frame(config, container, angle, rng)?);
    }
    ClassificationWindow::new(frames, config.axis.clone())
}

/// Generates the full corpus described by `config` and `counts`.
///
/// Windows are emitted class by class in class-code order. Each window's
/// generator is derived from the seed, the class, and the window ordinal
/// alone, so window `i` of a class is identical no matter what the other
/// counts are.
pub fn generate_dataset(config: &SimConfig, counts: &ClassCounts) -> Result<WindowSet> {
    config.validate()?;
    if counts.total() == 0 {
        return Err(Error::EmptyDataset("zero windows requested".into()));
    }

    let mut items = Vec::with_capacity(counts.total());
    let mut next_container_id: u32 = 0;
    for class in MaterialClass::ALL {
        let n = counts.for_class(class);
        let class_tag = u64::from(class.code());
        let mut current: Option<ContainerSpec> = None;
        let mut base_id = 0;
        for w in 0..n {
            let container_ordinal = (w / config.windows_per_container) as u64;
            if w % config.windows_per_container == 0 {
                if class != MaterialClass::Empty {
                    let mut crng =
                        derive_rng(config.seed, &[stream::CONTAINER, class_tag, container_ordinal]);
                    current = Some(sample_container(config, class, &mut crng)?);
                }
                base_id = next_container_id;
                next_container_id += 1;
            }
            let mut wrng = derive_rng(config.seed, &[stream::WINDOW, class_tag, w as u64]);
            let window = simulate_window(config, current.as_ref(), &mut wrng)?;
            items.push(LabeledWindow { window, label: class, container: base_id });
        }
    }

    Ok(WindowSet {
        items,
        seed: config.seed,
        config_digest: crate::digest::json_digest(config),
    })
}
