//! Material classification of containers from short-range radar sweeps.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`simulator`] renders synthetic range profiles of containers rotating
//!    on a disc in front of the sensor.
//! 2. [`features`] reduces each 30-frame window to six peak statistics.
//! 3. [`classifier`] trains a small dense network on labeled features and
//!    predicts one of five classes: metal, plastic, glass, paper, or empty.
//! 4. [`evaluation`] splits datasets and scores predictions with a
//!    confusion matrix.
//!
//! Everything is deterministic: a master seed fixes the generated data, the
//! train/test split, the weight initialization, and the dropout draws, so a
//! rerun reproduces results bit for bit.

pub mod classifier;
pub mod digest;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod features;
mod seed;
pub mod simulator;

pub use domain::{
    ClassificationWindow, Dataset, FeatureVector, Frame, MaterialClass, Provenance, RangeAxis,
    NUM_CLASSES, NUM_FEATURES,
};
pub use error::{Error, Result};
