//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation, feature, training, and evaluation stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A distance fell outside the range axis.
    #[error("distance {distance_mm} mm outside axis [{min_mm}, {max_mm}] mm")]
    DistanceOutOfRange {
        distance_mm: f64,
        min_mm: f64,
        max_mm: f64,
    },

    /// An integer class code outside 0..=4.
    #[error("invalid class code {0}, expected 0..=4")]
    InvalidClassCode(u8),

    /// An unknown class name in a file or config.
    #[error("unknown class name {0:?}")]
    UnknownClassName(String),

    /// A frame or window violated a structural invariant.
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    /// A window violated a structural invariant.
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    /// A configuration value violated an invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An operation that needs a physical material was given `Empty`.
    #[error("material {0} has no container profile")]
    InvalidMaterial(String),

    /// A container's reflection points fell outside the range axis.
    #[error("container geometry outside axis: {0}")]
    Geometry(String),

    /// Peak detection could not find a valid main/secondary pair.
    #[error("peak detection failed: {0}")]
    PeakDetection(String),

    /// A statistic that needs at least two samples was asked of fewer.
    #[error("variance undefined: window has {0} frame(s), need at least 2")]
    VarianceUndefined(usize),

    /// Too few records for the requested fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A dataset with no records where records are required.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Training asked of a dataset with fewer than two classes.
    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    /// A non-finite value appeared inside the network.
    #[error("numeric overflow in layer {layer}: {detail}")]
    NumericOverflow { layer: usize, detail: String },

    /// Mismatched dimensions between two sequences or tensors.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A serialized model document could not be decoded.
    #[error("model document: {0}")]
    ModelDocument(String),

    /// Model and data disagree on the class table.
    #[error("class-order mismatch: {0}")]
    ClassOrderMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
