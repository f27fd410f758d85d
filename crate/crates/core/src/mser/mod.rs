//! Maximally stable extremal regions.
//!
//! For a region `Q_i` at threshold `i` the variation is
//!
//! ```text
//! v(i) = (|Q_{i+delta}| - |Q_{i-delta}|) / |Q_i|
//! ```
//!
//! where `Q_{i+delta}` is the enclosing region and `Q_{i-delta}` the enclosed
//! region on the same branch (see [`ComponentTree::region_at`]). A tree node
//! spans the thresholds from its own level up to just below its parent's;
//! its stability is the smallest `v` over that span. Nodes whose stability
//! is a local minimum along the branch, small enough and inside the area
//! bounds are reported as boxes scored `1 / (1 + v)`.

mod tree;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use tree::{ComponentTree, ExtremalRegion};

use crate::error::{Error, Result};
use crate::imgcore::{BoundingBox, GrayImage};
use crate::nms::ScoredBox;

pub const DEFAULT_DELTA: u32 = 5;
pub const DEFAULT_MIN_AREA: usize = 30;
pub const DEFAULT_MAX_AREA_FRACTION: f64 = 0.25;
pub const DEFAULT_MAX_VARIATION: f64 = 0.5;

/// Which side of the threshold sweep a region comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Dark regions on a brighter surround.
    Dark,
    /// Bright regions on a darker surround (dark regions of the inverted image).
    Bright,
}

/// Polarities scanned by [`detect_mser`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolarityMode {
    Dark,
    Bright,
    Both,
}

impl PolarityMode {
    pub fn polarities(self) -> &'static [Polarity] {
        match self {
            PolarityMode::Dark => &[Polarity::Dark],
            PolarityMode::Bright => &[Polarity::Bright],
            PolarityMode::Both => &[Polarity::Dark, Polarity::Bright],
        }
    }
}

impl std::fmt::Display for PolarityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolarityMode::Dark => "dark",
            PolarityMode::Bright => "bright",
            PolarityMode::Both => "both",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MserParams {
    /// Threshold step between compared regions.
    pub delta: u32,
    pub min_area: usize,
    /// Largest reported region as a fraction of the image area.
    pub max_area_fraction: f64,
    /// Regions less stable than this are dropped.
    pub max_variation: f64,
    pub polarity: PolarityMode,
}

impl Default for MserParams {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            min_area: DEFAULT_MIN_AREA,
            max_area_fraction: DEFAULT_MAX_AREA_FRACTION,
            max_variation: DEFAULT_MAX_VARIATION,
            polarity: PolarityMode::Both,
        }
    }
}

impl MserParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta < 1 {
            return Err(Error::InvalidConfig("mser delta must be >= 1".into()));
        }
        if self.min_area < 1 {
            return Err(Error::InvalidConfig("mser min area must be >= 1".into()));
        }
        if !(self.max_area_fraction > 0.0 && self.max_area_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mser max area fraction must be in (0, 1], got {}",
                self.max_area_fraction
            )));
        }
        if self.max_variation.is_nan() || self.max_variation <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mser max variation must be > 0, got {}",
                self.max_variation
            )));
        }
        Ok(())
    }
}

/// `(|Q+| - |Q-|) / |Q|` from the three region areas.
pub fn variation(area_below: usize, area: usize, area_above: usize) -> f64 {
    (area_above as f64 - area_below as f64) / area as f64
}

/// Minimum variation of a region over its threshold span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stability {
    pub variation: f64,
    /// Threshold at which the minimum is attained (first one on ties).
    pub level: i32,
}

impl ComponentTree {
    /// `v(level)` for region `r`, using its branch neighbours `delta` levels away.
    pub fn variation_at(&self, r: usize, level: i32, delta: u32) -> f64 {
        let d = delta as i32;
        let above = self.regions()[self.region_at(r, level + d)].area;
        let below = self.regions()[self.region_at(r, level - d)].area;
        variation(below, self.regions()[r].area, above)
    }

    /// Last threshold at which `r` is still the component of its pixels.
    /// The root never changes again, so `level + delta` already covers every
    /// distinct value of its variation.
    fn span_end(&self, r: usize, delta: u32) -> i32 {
        match self.regions()[r].parent {
            Some(p) => i32::from(self.regions()[p].level) - 1,
            None => i32::from(self.regions()[r].level) + delta as i32,
        }
    }

    pub fn stability(&self, r: usize, delta: u32) -> Stability {
        let start = i32::from(self.regions()[r].level);
        let end = self.span_end(r, delta);
        let d = delta as i32;
        if end - start >= 2 * d {
            // Q is the same set at start and start + 2 delta.
            return Stability {
                variation: 0.0,
                level: start + d,
            };
        }
        let mut best = Stability {
            variation: f64::INFINITY,
            level: start,
        };
        for level in start..=end {
            let v = self.variation_at(r, level, delta);
            if v < best.variation {
                best = Stability {
                    variation: v,
                    level,
                };
            }
        }
        best
    }

    /// Stability of every region, indexed like [`ComponentTree::regions`].
    pub fn annotate(&self, delta: u32) -> Vec<Stability> {
        (0..self.len()).map(|r| self.stability(r, delta)).collect()
    }

    /// Whether `best` is not beaten at the thresholds adjacent to `r`'s span
    /// on its branch: the parent's first level and the main child's last.
    fn is_local_minimum(&self, r: usize, best: f64, delta: u32) -> bool {
        let region = &self.regions()[r];
        if let Some(p) = region.parent {
            let above = self.variation_at(p, i32::from(self.regions()[p].level), delta);
            if best > above {
                return false;
            }
        }
        if let Some(c) = region.main_child {
            let below = self.variation_at(c, i32::from(region.level) - 1, delta);
            if best > below {
                return false;
            }
        }
        true
    }
}

/// A detected region box tagged with its polarity, the debug dump record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub score: f64,
    pub polarity: Polarity,
}

impl LabeledBox {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox {
            x0: self.x0,
            y0: self.y0,
            x1: self.x1,
            y1: self.y1,
        }
    }

    pub fn scored(&self) -> ScoredBox {
        ScoredBox::new(self.bbox(), self.score)
    }
}

fn detect_in_tree(tree: &ComponentTree, params: &MserParams, out: &mut Vec<LabeledBox>) {
    let (w, h) = tree.dimensions();
    let max_area = params.max_area_fraction * (w * h) as f64;
    for (r, region) in tree.regions().iter().enumerate() {
        // The root is the whole frame: nothing surrounds it to contrast with.
        if region.parent.is_none() {
            continue;
        }
        if region.area < params.min_area || region.area as f64 > max_area {
            continue;
        }
        let s = tree.stability(r, params.delta);
        if s.variation > params.max_variation
            || !tree.is_local_minimum(r, s.variation, params.delta)
        {
            continue;
        }
        let b = region.bbox;
        out.push(LabeledBox {
            x0: b.x0,
            y0: b.y0,
            x1: b.x1,
            y1: b.y1,
            score: 1.0 / (1.0 + s.variation),
            polarity: tree.polarity(),
        });
    }
}

/// Stable regions of every requested polarity, sorted by `(y0, x0, x1, y1)`
/// with dark before bright on ties.
pub fn detect_mser_labeled(img: &GrayImage, params: &MserParams) -> Vec<LabeledBox> {
    let mut out = Vec::new();
    for &polarity in params.polarity.polarities() {
        let tree = ComponentTree::build(img, polarity);
        detect_in_tree(&tree, params, &mut out);
    }
    out.sort_by(|a, b| {
        (a.y0, a.x0, a.x1, a.y1, a.polarity)
            .cmp(&(b.y0, b.x0, b.x1, b.y1, b.polarity))
            .then_with(|| b.score.total_cmp(&a.score))
    });
    out
}

pub fn detect_mser(img: &GrayImage, params: &MserParams) -> Vec<ScoredBox> {
    detect_mser_labeled(img, params)
        .iter()
        .map(LabeledBox::scored)
        .collect()
}

/// One JSON object per line: `{x0, y0, x1, y1, score, polarity}`.
pub fn write_boxes_jsonl<W: Write>(mut writer: W, boxes: &[LabeledBox]) -> std::io::Result<()> {
    for b in boxes {
        serde_json::to_writer(&mut writer, b)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
