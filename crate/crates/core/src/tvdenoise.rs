//! Total-variation denoising by explicit gradient descent.
//!
//! The discrete total variation of a field `y` is
//!
//! ```text
//! V(y) = sum_ij sqrt((y[i+1,j] - y[i,j])^2 + (y[i,j+1] - y[i,j])^2)
//! ```
//!
//! with forward differences that leave the frame taken as zero. Descent runs
//! on the smoothed objective
//!
//! ```text
//! F(y) = sum_ij sqrt(dx^2 + dy^2 + eps^2) + lambda/2 * sum_ij (y - f)^2
//! ```
//!
//! where `f` is the observed image. Its gradient has Lipschitz constant at
//! most `8 / eps + lambda`, so every step strictly decreases `F` (until a
//! stationary point) when `step * (8 / eps + lambda) < 2`. The defaults
//! (`step = 0.125`, `eps = 1`, `lambda = 0.03`) satisfy this.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::GrayImage;

pub const DEFAULT_ITERATIONS: usize = 100;
pub const DEFAULT_STEP: f64 = 0.125;
pub const DEFAULT_FIDELITY_WEIGHT: f64 = 0.03;
pub const DEFAULT_EPSILON: f64 = 1.0;

/// Upper bound on the step accepted by [`DenoiseParams::validate`].
pub const MAX_STEP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseParams {
    pub iterations: usize,
    /// Descent step size.
    pub step: f64,
    /// Weight of the quadratic fidelity term.
    pub fidelity_weight: f64,
    /// Gradient-magnitude smoothing, in intensity units.
    pub epsilon: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            step: DEFAULT_STEP,
            fidelity_weight: DEFAULT_FIDELITY_WEIGHT,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= MAX_STEP) {
            return Err(Error::InvalidConfig(format!(
                "tv step must be in (0, {MAX_STEP}], got {}",
                self.step
            )));
        }
        if !(self.fidelity_weight >= 0.0 && self.fidelity_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tv fidelity weight must be finite and >= 0, got {}",
                self.fidelity_weight
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tv epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Real-valued row-major field, the working state of the descent.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealField {
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Option<Self> {
        let ok = width >= 1
            && height >= 1
            && data.len() == width * height
            && data.iter().all(|v| v.is_finite());
        ok.then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.as_slice().iter().map(|&v| f64::from(v)).collect(),
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Round half away from zero and clamp to `[0, 255]`.
    pub fn quantize(&self) -> GrayImage {
        let data = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::from_raw(self.width, self.height, data).expect("dimensions preserved")
    }

    fn check_same_size(&self, other: &RealField) -> Result<()> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::mismatch(self.dimensions(), other.dimensions()));
        }
        Ok(())
    }
}

/// Forward differences at `i`: `(right - here, below - here)`, zero off-frame.
#[inline]
fn forward_diffs(data: &[f64], width: usize, height: usize, x: usize, y: usize) -> (f64, f64) {
    let i = y * width + x;
    let dx = if x + 1 < width { data[i + 1] - data[i] } else { 0.0 };
    let dy = if y + 1 < height { data[i + width] - data[i] } else { 0.0 };
    (dx, dy)
}

fn smoothed_sum(field: &RealField, eps_sq: f64) -> f64 {
    let (w, h) = field.dimensions();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = forward_diffs(&field.data, w, h, x, y);
            total += (dx * dx + dy * dy + eps_sq).sqrt();
        }
    }
    total
}

/// Discrete total variation with zero boundary differences.
pub fn tv_energy(field: &RealField) -> f64 {
    smoothed_sum(field, 0.0)
}

/// `sum sqrt(dx^2 + dy^2 + eps^2)`; bounds [`tv_energy`] from above.
pub fn smoothed_tv_energy(field: &RealField, epsilon: f64) -> f64 {
    smoothed_sum(field, epsilon * epsilon)
}

fn fidelity(img: &RealField, reference: &RealField, lambda: f64) -> f64 {
    let sq: f64 = img
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * lambda * sq
}

/// `tv_energy(img) + lambda/2 * sum (img - reference)^2`.
pub fn tv_objective(img: &RealField, reference: &RealField, lambda: f64) -> Result<f64> {
    img.check_same_size(reference)?;
    Ok(tv_energy(img) + fidelity(img, reference, lambda))
}

/// The descent objective: smoothed TV plus the fidelity term.
pub fn smoothed_objective(
    img: &RealField,
    reference: &RealField,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    img.check_same_size(reference)?;
    Ok(smoothed_tv_energy(img, epsilon) + fidelity(img, reference, lambda))
}

/// Scratch buffers for the normalized forward differences.
struct GradientWorkspace {
    px: Vec<f64>,
    py: Vec<f64>,
}

impl GradientWorkspace {
    fn new(len: usize) -> Self {
        Self {
            px: vec![0.0; len],
            py: vec![0.0; len],
        }
    }

    /// Writes the gradient of the smoothed objective at `y` into `out`.
    ///
    /// Each cell's term `sqrt(dx^2 + dy^2 + eps^2)` depends on the cell, its
    /// right neighbour and the one below; the sum over terms gives the
    /// negative discrete divergence of the normalized gradient field.
    fn gradient(
        &mut self,
        y: &RealField,
        reference: &RealField,
        lambda: f64,
        epsilon: f64,
        out: &mut [f64],
    ) {
        let (w, h) = y.dimensions();
        let eps_sq = epsilon * epsilon;
        for row in 0..h {
            for col in 0..w {
                let (dx, dy) = forward_diffs(&y.data, w, h, col, row);
                let norm = (dx * dx + dy * dy + eps_sq).sqrt();
                let i = row * w + col;
                self.px[i] = dx / norm;
                self.py[i] = dy / norm;
            }
        }
        for row in 0..h {
            for col in 0..w {
                let i = row * w + col;
                let mut g = -(self.px[i] + self.py[i]);
                if col > 0 {
                    g += self.px[i - 1];
                }
                if row > 0 {
                    g += self.py[i - w];
                }
                out[i] = g + lambda * (y.data[i] - reference.data[i]);
            }
        }
    }
}

/// Analytic gradient of [`smoothed_objective`] with respect to `img`.
pub fn tv_gradient(
    img: &RealField,
    reference: &RealField,
    lambda: f64,
    epsilon: f64,
) -> Result<RealField> {
    img.check_same_size(reference)?;
    let mut out = vec![0.0; img.data.len()];
    GradientWorkspace::new(img.data.len()).gradient(img, reference, lambda, epsilon, &mut out);
    Ok(RealField {
        width: img.width,
        height: img.height,
        data: out,
    })
}

/// Runs the descent from `reference` and returns the final real-valued
/// iterate. `observe` sees every iterate after each step, numbered from 1.
pub fn denoise_field_with(
    reference: &RealField,
    params: &DenoiseParams,
    mut observe: impl FnMut(usize, &RealField),
) -> RealField {
    let mut current = reference.clone();
    let mut grad = vec![0.0; current.data.len()];
    let mut ws = GradientWorkspace::new(current.data.len());
    for iteration in 1..=params.iterations {
        ws.gradient(
            &current,
            reference,
            params.fidelity_weight,
            params.epsilon,
            &mut grad,
        );
        for (v, g) in current.data.iter_mut().zip(&grad) {
            *v -= params.step * g;
        }
        observe(iteration, &current);
    }
    current
}

pub fn denoise_field(reference: &RealField, params: &DenoiseParams) -> RealField {
    denoise_field_with(reference, params, |_, _| {})
}

/// Denoise an 8-bit image; quantization happens once, after the last step.
pub fn tv_denoise(img: &GrayImage, params: &DenoiseParams) -> GrayImage {
    denoise_field(&RealField::from_gray(img), params).quantize()
}

/// Like [`tv_denoise`], also returning quantized copies of the iterates
/// listed in `snapshot_at` (iteration numbers start at 1).
pub fn tv_denoise_with_snapshots(
    img: &GrayImage,
    params: &DenoiseParams,
    snapshot_at: &[usize],
) -> (GrayImage, Vec<(usize, GrayImage)>) {
    let mut snapshots = Vec::new();
    let out = denoise_field_with(&RealField::from_gray(img), params, |k, field| {
        if snapshot_at.contains(&k) {
            snapshots.push((k, field.quantize()));
        }
    });
    (out.quantize(), snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(w: usize, h: usize, data: &[f64]) -> RealField {
        RealField::from_raw(w, h, data.to_vec()).unwrap()
    }

    fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize, scale: f64) -> RealField {
        let data = (0..w * h).map(|_| rng.random::<f64>() * scale).collect();
        RealField::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn energy_examples() {
        assert_eq!(tv_energy(&field(3, 2, &[7.0; 6])), 0.0);
        assert_eq!(tv_energy(&field(2, 2, &[0.0, 1.0, 0.0, 1.0])), 2.0);
        assert_eq!(tv_energy(&field(3, 1, &[0.0, 3.0, 4.0])), 4.0);
    }

    #[test]
    fn objective_examples() {
        let c = field(4, 3, &[5.0; 12]);
        assert_eq!(tv_objective(&c, &c, 0.7).unwrap(), 0.0);
        let r = field(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert!(tv_objective(&r, &c, 0.0).is_err());
        assert_eq!(tv_objective(&r, &field(2, 2, &[9.0; 4]), 0.0).unwrap(), 2.0);
        let plus_one = field(4, 3, &[6.0; 12]);
        let v = tv_objective(&plus_one, &c, 0.3).unwrap();
        assert!((v - 0.3 * 12.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_constant_reference() {
        let c = field(5, 4, &[42.0; 20]);
        let g = tv_gradient(&c, &c, 0.03, 1.0).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_rejects_mismatch() {
        let a = field(2, 2, &[0.0; 4]);
        let b = field(4, 1, &[0.0; 4]);
        assert!(matches!(
            tv_gradient(&a, &b, 0.0, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let img = random_field(&mut rng, 6, 5, 50.0);
            let reference = random_field(&mut rng, 6, 5, 50.0);
            let (lambda, eps) = (0.05, 0.8);
            let g = tv_gradient(&img, &reference, lambda, eps).unwrap();
            let h = 1e-4;
            for i in 0..img.data.len() {
                let mut plus = img.clone();
                plus.data[i] += h;
                let mut minus = img.clone();
                minus.data[i] -= h;
                let fd = (smoothed_objective(&plus, &reference, lambda, eps).unwrap()
                    - smoothed_objective(&minus, &reference, lambda, eps).unwrap())
                    / (2.0 * h);
                let err = (fd - g.data[i]).abs() / fd.abs().max(g.data[i].abs()).max(1.0);
                assert!(err < 1e-4, "cell {i}: analytic {} vs fd {fd}", g.data[i]);
            }
        }
    }

    #[test]
    fn denoise_trivial_cases() {
        let flat = GrayImage::filled(9, 7, 80);
        assert_eq!(tv_denoise(&flat, &DenoiseParams::default()), flat);
        let img = GrayImage::from_fn(5, 5, |x, y| (x * 40 + y * 3) as u8);
        let none = DenoiseParams {
            iterations: 0,
            ..Default::default()
        };
        assert_eq!(tv_denoise(&img, &none), img);
    }

    #[test]
    fn smoothed_energy_converges_from_above() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&mut rng, 10, 10, 255.0);
        let exact = tv_energy(&f);
        let mut previous = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let s = smoothed_tv_energy(&f, eps);
            assert!(s >= exact && s < previous);
            previous = s;
        }
        assert!(previous - exact < 100.0 * 0.01 + 1e-9);
    }

    #[test]
    fn energy_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_field(&mut rng, 7, 9, 255.0);
        let shifted = RealField::from_raw(7, 9, f.data.iter().map(|v| v + 31.5).collect()).unwrap();
        assert!((tv_energy(&f) - tv_energy(&shifted)).abs() < 1e-9);
    }

    #[test]
    fn snapshots_are_taken_at_requested_iterations() {
        let img = GrayImage::from_fn(8, 8, |x, y| ((x * 31 + y * 17) % 256) as u8);
        let (out, snaps) = tv_denoise_with_snapshots(&img, &DenoiseParams::default(), &[1, 10, 100]);
        assert_eq!(snaps.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 10, 100]);
        assert_eq!(snaps[2].1, out);
        assert_eq!(out, tv_denoise(&img, &DenoiseParams::default()));
    }

    #[test]
    fn validation_bounds() {
        assert!(DenoiseParams::default().validate().is_ok());
        let bad_step = DenoiseParams {
            step: 0.3,
            ..Default::default()
        };
        assert!(bad_step.validate().is_err());
        let bad_eps = DenoiseParams {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(bad_eps.validate().is_err());
        let bad_lambda = DenoiseParams {
            fidelity_weight: -1.0,
            ..Default::default()
        };
        assert!(bad_lambda.validate().is_err());
    }

    #[test]
    fn descent_is_monotone_under_defaults() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reference = random_field(&mut rng, 16, 16, 255.0);
        let p = DenoiseParams::default();
        let mut last = smoothed_objective(&reference, &reference, p.fidelity_weight, p.epsilon).unwrap();
        denoise_field_with(&reference, &p, |_, y| {
            let now = smoothed_objective(y, &reference, p.fidelity_weight, p.epsilon).unwrap();
            assert!(now <= last + 1e-9);
            last = now;
        });
    }

    #[test]
    fn random_gray_denoise_lowers_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = GrayImage::from_fn(20, 20, |_, _| rng.random());
        let out = tv_denoise(&img, &DenoiseParams::default());
        assert!(tv_energy(&RealField::from_gray(&out)) < tv_energy(&RealField::from_gray(&img)));
    }
}
