//! Greedy non-maximum suppression over scored boxes.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::imgcore::BoundingBox;

/// Default suppression threshold: a box whose IoU with a kept box is at
/// least this value is dropped.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.4;

/// A detection: a box and a confidence in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BoundingBox,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: BoundingBox, score: f64) -> Self {
        Self { bbox, score }
    }
}

/// Intersection over union of the two cell sets, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Selection order: score descending, then larger area, then `(y0, x0, y1, x1)` ascending.
fn selection_order(a: &ScoredBox, b: &ScoredBox) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.bbox.area().cmp(&a.bbox.area()))
        .then_with(|| (a.bbox.y0, a.bbox.x0).cmp(&(b.bbox.y0, b.bbox.x0)))
        .then_with(|| (a.bbox.y1, a.bbox.x1).cmp(&(b.bbox.y1, b.bbox.x1)))
}

/// Keep the best remaining box, drop everything overlapping it with
/// `iou >= iou_threshold`, repeat. Kept boxes are returned in selection order.
pub fn nms(detections: &[ScoredBox], iou_threshold: f64) -> Vec<ScoredBox> {
    let mut order: Vec<ScoredBox> = detections.to_vec();
    order.sort_by(selection_order);

    let mut suppressed = vec![false; order.len()];
    let mut kept = Vec::new();
    for i in 0..order.len() {
        if suppressed[i] {
            continue;
        }
        let best = order[i];
        kept.push(best);
        for (j, other) in order.iter().enumerate().skip(i + 1) {
            if !suppressed[j] && iou(&best.bbox, &other.bbox) >= iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    kept
}
