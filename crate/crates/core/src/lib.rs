//! Binary manipulation masks from (original, tampered) image pairs.
//!
//! The pair is converted to grayscale and differenced. Two branches then
//! run over the difference image:
//!
//! * text: maximally stable extremal regions, reduced by non-maximum
//!   suppression and filled as boxes;
//! * graphic: smoothed total-variation descent with a quadratic fidelity
//!   term, grayscale erosion, thresholding and binary erosion/dilation.
//!
//! The union of both branches is the final mask. [`dataset`] drives the
//! pipeline over a directory corpus and writes a JSON Lines manifest.

pub mod cli;
pub mod dataset;
mod error;
pub mod imgcore;
pub mod morphology;
pub mod mser;
pub mod nms;
pub mod pipeline;
pub mod tvdenoise;

pub use error::{Error, Result};
pub use imgcore::{BinaryMask, BoundingBox, ColorImage, GrayImage};
pub use mser::{MserParams, Polarity};
pub use nms::ScoredBox;
pub use pipeline::{generate_mask, PairStats, PipelineConfig};
pub use tvdenoise::{DenoiseParams, RealField};
