//! End-to-end mask generation for one (original, tampered) pair.
//!
//! ```text
//! diff = |gray(original) - gray(tampered)|
//! text    = fill(nms(mser(diff)))
//! graphic = dilate^k(erode^m(binarize(erode_gray^j(tv(diff)), t)))
//! mask    = erode^u(text | graphic)        (u = 0 by default)
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{
    abs_diff, binarize, fill_boxes, save_gray, save_mask, to_gray, union, BinaryMask, ColorImage,
    GrayImage,
};
use crate::morphology::{dilate_binary, erode_binary, erode_gray};
use crate::mser::{detect_mser_labeled, write_boxes_jsonl, LabeledBox, MserParams};
use crate::nms::{self, ScoredBox};
use crate::tvdenoise::{tv_denoise, tv_energy, DenoiseParams, RealField};

pub const DEFAULT_PRE_BINARIZE_EROSIONS: usize = 2;
pub const DEFAULT_BINARIZE_THRESHOLD: u8 = 15;
pub const DEFAULT_POST_BINARIZE_EROSIONS: usize = 8;
pub const DEFAULT_POST_DILATIONS: usize = 2;
pub const DEFAULT_POST_UNION_EROSIONS: usize = 0;

/// File names written by [`dump_intermediates`].
pub const DUMP_FILES: [&str; 5] = ["diff.png", "text.png", "tv.png", "binary.png", "mask.png"];
/// MSER detections (before suppression), one JSON object per line.
pub const DUMP_BOXES_FILE: &str = "boxes.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mser: MserParams,
    pub nms_iou_threshold: f64,
    pub denoise: DenoiseParams,
    /// Grayscale erosions between denoising and thresholding.
    pub pre_binarize_erosions: usize,
    /// Cells at or above this intensity become white.
    pub binarize_threshold: u8,
    pub post_binarize_erosions: usize,
    pub post_dilations: usize,
    /// Binary erosions of the combined mask. Off by default.
    pub post_union_erosions: usize,
    pub dump_intermediates: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mser: MserParams::default(),
            nms_iou_threshold: nms::DEFAULT_IOU_THRESHOLD,
            denoise: DenoiseParams::default(),
            pre_binarize_erosions: DEFAULT_PRE_BINARIZE_EROSIONS,
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
            post_binarize_erosions: DEFAULT_POST_BINARIZE_EROSIONS,
            post_dilations: DEFAULT_POST_DILATIONS,
            post_union_erosions: DEFAULT_POST_UNION_EROSIONS,
            dump_intermediates: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mser.validate()?;
        self.denoise.validate()?;
        if !(self.nms_iou_threshold > 0.0 && self.nms_iou_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "nms iou threshold must be in (0, 1], got {}",
                self.nms_iou_threshold
            )));
        }
        // A zero threshold turns every cell white, including an unchanged pair.
        if self.binarize_threshold == 0 {
            return Err(Error::InvalidConfig(
                "binarize threshold must be in [1, 255]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pair counters, serialized with the manifest field names.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub boxes_before_nms: usize,
    pub boxes_after_nms: usize,
    /// Total variation of the difference image.
    pub tv_energy_before: f64,
    /// Total variation of the quantized denoiser output.
    pub tv_energy_after: f64,
    pub white_fraction: f64,
    pub elapsed_ms: f64,
}

/// Every stage output of one run.
#[derive(Clone, Debug)]
pub struct Stages {
    pub diff: GrayImage,
    /// MSER detections before suppression.
    pub detections: Vec<LabeledBox>,
    pub kept_boxes: Vec<ScoredBox>,
    pub text_mask: BinaryMask,
    pub denoised: GrayImage,
    /// Thresholded image before binary morphology.
    pub binary: BinaryMask,
    pub graphic_mask: BinaryMask,
    pub mask: BinaryMask,
    pub stats: PairStats,
}

/// Run the pipeline on a pair of decoded images, keeping every stage.
pub fn run_stages(
    original: &ColorImage,
    tampered: &ColorImage,
    config: &PipelineConfig,
) -> Result<Stages> {
    let start = Instant::now();
    let diff = abs_diff(&to_gray(original), &to_gray(tampered))?;
    let (w, h) = diff.dimensions();

    let detections = detect_mser_labeled(&diff, &config.mser);
    let scored: Vec<ScoredBox> = detections.iter().map(LabeledBox::scored).collect();
    let kept_boxes = nms::nms(&scored, config.nms_iou_threshold);
    let text_mask = fill_boxes(w, h, kept_boxes.iter().map(|b| &b.bbox));

    let denoised = tv_denoise(&diff, &config.denoise);
    let eroded = erode_gray(&denoised, config.pre_binarize_erosions);
    let binary = binarize(&eroded, config.binarize_threshold);
    let graphic_mask = dilate_binary(
        &erode_binary(&binary, config.post_binarize_erosions),
        config.post_dilations,
    );
    let combined = union(&graphic_mask, &text_mask)?;
    let mask = erode_binary(&combined, config.post_union_erosions);

    let stats = PairStats {
        boxes_before_nms: detections.len(),
        boxes_after_nms: kept_boxes.len(),
        tv_energy_before: tv_energy(&RealField::from_gray(&diff)),
        tv_energy_after: tv_energy(&RealField::from_gray(&denoised)),
        white_fraction: mask.white_fraction(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(Stages {
        diff,
        detections,
        kept_boxes,
        text_mask,
        denoised,
        binary,
        graphic_mask,
        mask,
        stats,
    })
}

/// Final mask and statistics for one pair.
pub fn generate_mask(
    original: &ColorImage,
    tampered: &ColorImage,
    config: &PipelineConfig,
) -> Result<(BinaryMask, PairStats)> {
    let stages = run_stages(original, tampered, config)?;
    Ok((stages.mask, stages.stats))
}

/// Write the stage images under their fixed names, plus the box dump.
pub fn dump_intermediates(stages: &Stages, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let [diff, text, tv, binary, mask] = DUMP_FILES;
    save_gray(&stages.diff, out_dir.join(diff))?;
    save_mask(&stages.text_mask, out_dir.join(text))?;
    save_gray(&stages.denoised, out_dir.join(tv))?;
    save_mask(&stages.binary, out_dir.join(binary))?;
    save_mask(&stages.mask, out_dir.join(mask))?;
    let boxes_path = out_dir.join(DUMP_BOXES_FILE);
    let file = File::create(&boxes_path).map_err(|e| Error::io(&boxes_path, e))?;
    write_boxes_jsonl(BufWriter::new(file), &stages.detections)
        .map_err(|e| Error::io(&boxes_path, e))
}
