#![allow(dead_code)]

use maskgen::{BinaryMask, BoundingBox, ColorImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Flat-128 original; the tampered copy has a 100x80 block set to 200 and
/// i.i.d. integer noise in [-2, 2] added to every pixel.
pub fn rectangle_fixture(size: usize, seed: u64) -> (ColorImage, ColorImage, BoundingBox) {
    let rect = BoundingBox::new(
        (size * 2 / 5) as u32,
        (size * 3 / 10) as u32,
        (size * 2 / 5 + 100) as u32,
        (size * 3 / 10 + 80) as u32,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let original = ColorImage::from_fn(size, size, |_, _| [128, 128, 128]);
    let tampered = ColorImage::from_fn(size, size, |x, y| {
        let base: i32 = if rect.contains(x as u32, y as u32) { 200 } else { 128 };
        let v = (base + rng.random_range(-2..=2)).clamp(0, 255) as u8;
        [v, v, v]
    });
    (original, tampered, rect)
}

/// IoU between a mask's white set and a rectangle, plus the white fraction
/// of the cells outside the rectangle.
pub fn mask_vs_rect(mask: &BinaryMask, rect: &BoundingBox) -> (f64, f64) {
    let (w, h) = mask.dimensions();
    let (mut inter, mut union, mut outside_white, mut outside) = (0u64, 0u64, 0u64, 0u64);
    for y in 0..h {
        for x in 0..w {
            let white = mask.is_white(x, y);
            let inside = rect.contains(x as u32, y as u32);
            inter += u64::from(white && inside);
            union += u64::from(white || inside);
            if !inside {
                outside += 1;
                outside_white += u64::from(white);
            }
        }
    }
    (inter as f64 / union as f64, outside_white as f64 / outside as f64)
}

pub fn random_color(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ColorImage {
    ColorImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
}
