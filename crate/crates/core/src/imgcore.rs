//! Image containers, grayscale conversion, differencing, binarization,
//! mask algebra and PNG/JPEG I/O.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// White cell value of a [`BinaryMask`].
pub const WHITE: u8 = 255;
/// Black cell value of a [`BinaryMask`].
pub const BLACK: u8 = 0;

/// Row-major 8-bit single channel image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Returns `None` when a dimension is zero or `data` has the wrong length.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        (width >= 1 && height >= 1 && data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// Intensity-inverted copy (`255 - v`).
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 255 - v).collect(),
        }
    }
}

/// Row-major RGB image, 8 bits per channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl ColorImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<[u8; 3]>) -> Option<Self> {
        (width >= 1 && height >= 1 && data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Gray image expanded to equal R=G=B triples.
    pub fn from_gray(gray: &GrayImage) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[[u8; 3]] {
        &self.data
    }
}

/// Row-major mask whose cells are exactly [`BLACK`] or [`WHITE`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn black(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![BLACK; width * height],
        }
    }

    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn white(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![WHITE; width * height],
        }
    }

    /// Accepts only buffers whose every value is 0 or 255.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        let valid = width >= 1
            && height >= 1
            && data.len() == width * height
            && data.iter().all(|&v| v == BLACK || v == WHITE);
        valid.then_some(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(if f(x, y) { WHITE } else { BLACK });
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[cfg(test)]
    pub(crate) fn from_bools(width: usize, height: usize, cells: &[bool]) -> Self {
        debug_assert_eq!(cells.len(), width * height);
        Self {
            width,
            height,
            data: cells.iter().map(|&w| if w { WHITE } else { BLACK }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_white(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == WHITE
    }

    pub fn set(&mut self, x: usize, y: usize, white: bool) {
        self.data[y * self.width + x] = if white { WHITE } else { BLACK };
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn white_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == WHITE).count()
    }

    pub fn white_fraction(&self) -> f64 {
        self.white_count() as f64 / self.data.len() as f64
    }

    /// Cells flipped between black and white.
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| WHITE - v).collect(),
        }
    }

    /// True when every white cell of `self` is also white in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dimensions() == other.dimensions()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a == BLACK || b == WHITE)
    }
}

/// Half-open integer rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    /// Returns `None` for empty or inverted rectangles.
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Option<Self> {
        (x0 < x1 && y0 < y1).then_some(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Overlapping cell count with `other`.
    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let w = self.x1.min(other.x1).saturating_sub(self.x0.max(other.x0));
        let h = self.y1.min(other.y1).saturating_sub(self.y0.max(other.y0));
        u64::from(w) * u64::from(h)
    }

    /// Clip to a `width x height` frame; `None` when nothing remains.
    pub fn clipped(&self, width: usize, height: usize) -> Option<Self> {
        let w = u32::try_from(width).unwrap_or(u32::MAX);
        let h = u32::try_from(height).unwrap_or(u32::MAX);
        Self::new(self.x0, self.y0, self.x1.min(w), self.y1.min(h))
    }
}

/// BT.601 luma, rounded half away from zero.
pub fn to_gray(img: &ColorImage) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|&[r, g, b]| {
            // Weights scaled by 1000; operands are non-negative so +500 rounds half up.
            let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
            ((weighted + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Cellwise `|a - b|`.
pub fn abs_diff(a: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::mismatch(a.dimensions(), b.dimensions()));
    }
    let data = a.data.iter().zip(&b.data).map(|(&p, &q)| p.abs_diff(q)).collect();
    Ok(GrayImage {
        width: a.width,
        height: a.height,
        data,
    })
}

/// White where `intensity >= threshold`.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&v| if v >= threshold { WHITE } else { BLACK })
            .collect(),
    }
}

pub fn union(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::mismatch(a.dimensions(), b.dimensions()));
    }
    Ok(BinaryMask {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(&p, &q)| p | q).collect(),
    })
}

/// Mask that is white inside any of `boxes` after clipping to the frame.
pub fn fill_boxes<'a>(
    width: usize,
    height: usize,
    boxes: impl IntoIterator<Item = &'a BoundingBox>,
) -> BinaryMask {
    let mut mask = BinaryMask::black(width, height);
    for b in boxes.into_iter().filter_map(|b| b.clipped(width, height)) {
        for y in b.y0 as usize..b.y1 as usize {
            mask.data[y * width + b.x0 as usize..y * width + b.x1 as usize].fill(WHITE);
        }
    }
    mask
}

/// Decode a PNG or JPEG file into RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ColorImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.pixels().map(|p| p.0).collect();
    ColorImage::from_raw(w, h, data).ok_or_else(|| Error::Decode {
        path: path.to_path_buf(),
        message: "image has zero area".into(),
    })
}

/// Write an 8-bit grayscale PNG.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_luma_png(path.as_ref(), img.width, img.height, &img.data)
}

/// Write the mask as an 8-bit grayscale PNG with samples in {0, 255}.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_luma_png(path.as_ref(), mask.width, mask.height, &mask.data)
}

fn write_luma_png(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let too_large = || Error::InvalidConfig(format!("{width}x{height} exceeds PNG limits"));
    let w = u32::try_from(width).map_err(|_| too_large())?;
    let h = u32::try_from(height).map_err(|_| too_large())?;
    image::save_buffer_with_format(
        path,
        data,
        w,
        h,
        image::ExtendedColorType::L8,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    })
}
