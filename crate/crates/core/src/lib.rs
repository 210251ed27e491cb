//! Visual object tracking by superpixel tensor pooling.
//!
//! Each candidate window is warped to a fixed-size template, segmented into
//! an exact number of superpixels, and every superpixel is described by
//! HSI/RGB/spatial histograms. The histograms are sparse coded against a
//! dictionary learned on the first frame and the codes are stacked into a
//! third-order tensor. Candidates are scored by their reconstruction error
//! against incrementally learned positive and negative tensor subspaces, and
//! a particle filter picks the MAP state per frame.
//!
//! The [`harness`] module ingests OTB-style sequences and computes the
//! precision/success curves used to evaluate trackers.

pub mod appearance;
pub mod coding;
pub mod config;
pub mod cues;
pub mod error;
pub mod harness;
pub mod media;
pub mod motion;
pub mod snic;
pub mod tensor;
pub mod tracker;

pub use error::{Error, Result};
pub use harness::BoundingBox;
pub use media::{ImageHsi, ImageRgb, Patch};
pub use motion::AffineState;
pub use tracker::{Diagnostics, TrackerConfig, TrackerState};
