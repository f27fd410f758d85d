//! Erosion and dilation with a 3x3 square structuring element.
//!
//! Grayscale erosion replicates edge pixels, so a flat image stays flat.
//! Binary operations treat everything outside the frame as black, so white
//! regions shrink away from the border under erosion.

use crate::imgcore::{BinaryMask, GrayImage, BLACK};

#[derive(Clone, Copy)]
enum Reduce {
    Min,
    Max,
}

impl Reduce {
    fn apply(self, a: u8, b: u8) -> u8 {
        match self {
            Reduce::Min => a.min(b),
            Reduce::Max => a.max(b),
        }
    }
}

/// Border handling: `None` replicates the edge, `Some(v)` pads with `v`.
type Pad = Option<u8>;

/// One 3x3 filter pass, computed as a horizontal then a vertical 3-tap pass
/// (the square element is separable for min/max).
fn filter3x3(src: &[u8], width: usize, height: usize, op: Reduce, pad: Pad) -> Vec<u8> {
    let mut horiz = vec![0u8; src.len()];
    for (row_in, row_out) in src.chunks_exact(width).zip(horiz.chunks_exact_mut(width)) {
        for x in 0..width {
            let left = if x > 0 { row_in[x - 1] } else { pad.unwrap_or(row_in[x]) };
            let right = if x + 1 < width {
                row_in[x + 1]
            } else {
                pad.unwrap_or(row_in[x])
            };
            row_out[x] = op.apply(op.apply(left, row_in[x]), right);
        }
    }

    let mut out = vec![0u8; src.len()];
    for y in 0..height {
        let here = &horiz[y * width..(y + 1) * width];
        let up = (y > 0).then(|| &horiz[(y - 1) * width..y * width]);
        let down = (y + 1 < height).then(|| &horiz[(y + 1) * width..(y + 2) * width]);
        let dst = &mut out[y * width..(y + 1) * width];
        for x in 0..width {
            let u = up.map_or_else(|| pad.unwrap_or(here[x]), |r| r[x]);
            let d = down.map_or_else(|| pad.unwrap_or(here[x]), |r| r[x]);
            dst[x] = op.apply(op.apply(u, here[x]), d);
        }
    }
    out
}

fn repeat(
    src: &[u8],
    width: usize,
    height: usize,
    n: usize,
    op: Reduce,
    pad: Pad,
) -> Vec<u8> {
    let mut cur = src.to_vec();
    for _ in 0..n {
        cur = filter3x3(&cur, width, height, op, pad);
    }
    cur
}

/// `n` passes of the 3x3 minimum filter with replicated borders.
pub fn erode_gray(img: &GrayImage, n: usize) -> GrayImage {
    let (w, h) = img.dimensions();
    let data = repeat(img.as_slice(), w, h, n, Reduce::Min, None);
    GrayImage::from_raw(w, h, data).expect("dimensions preserved")
}

/// `n` passes of binary erosion; outside the frame counts as black.
pub fn erode_binary(mask: &BinaryMask, n: usize) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let data = repeat(mask.as_slice(), w, h, n, Reduce::Min, Some(BLACK));
    BinaryMask::from_raw(w, h, data).expect("min of {0,255} stays binary")
}

/// `n` passes of binary dilation; outside the frame counts as black.
pub fn dilate_binary(mask: &BinaryMask, n: usize) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let data = repeat(mask.as_slice(), w, h, n, Reduce::Max, Some(BLACK));
    BinaryMask::from_raw(w, h, data).expect("max of {0,255} stays binary")
}

/// Erosion with white padding, the dual border convention of [`dilate_binary`].
#[cfg(test)]
fn erode_binary_white_outside(mask: &BinaryMask, n: usize) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let data = repeat(mask.as_slice(), w, h, n, Reduce::Min, Some(crate::imgcore::WHITE));
    BinaryMask::from_raw(w, h, data).unwrap()
}
