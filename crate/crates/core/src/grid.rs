//! Scalar image grids, fuzzy membership fields and hard label masks.
//!
//! All grids are stored row-major: pixel `(i, j)` (row `i`, column `j`) lives
//! at `data[i * width + j]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum-to-one tolerance accepted by [`MembershipField::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// An `m x n` grid of finite real values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} grid needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at pixel ({}, {})",
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds a grid without checking finiteness. Dimensions must already match.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        Self::from_raw(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self::from_raw(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.width + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_raw(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two grids of equal shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self::from_raw(
            self.height,
            self.width,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Affine rescale to `[0, 1]`. A constant grid maps to all zeros.
    pub fn normalize(&self) -> Self {
        let (lo, hi) = (self.min(), self.max());
        let range = hi - lo;
        if range <= 0.0 {
            return Self::zeros(self.height, self.width);
        }
        self.map(|v| (v - lo) / range)
    }

    /// Adds i.i.d. Gaussian noise drawn in row-major pixel order from a
    /// ChaCha8 stream seeded with `spec.seed`. Values are not clipped.
    pub fn add_gaussian_noise(&self, spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        if spec.variance == 0.0 {
            return Ok(self.map(|v| v + spec.mean));
        }
        let normal = Normal::new(spec.mean, spec.variance.sqrt())
            .map_err(|e| Error::param("variance", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(self.map(|v| v + normal.sample(&mut rng)))
    }
}

/// Gaussian noise parameters. `variance` is the variance, not the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(mean: f64, variance: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            mean,
            variance,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0) || !self.variance.is_finite() {
            return Err(Error::param(
                "variance",
                format!("must be finite and nonnegative, got {}", self.variance),
            ));
        }
        if !self.mean.is_finite() {
            return Err(Error::param("mean", "must be finite"));
        }
        Ok(())
    }
}

/// `N >= 2` grids of identical shape whose values lie on the probability
/// simplex at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipField {
    grids: Vec<ImageGrid>,
}

impl MembershipField {
    pub fn new(grids: Vec<ImageGrid>) -> Result<Self> {
        let field = Self::from_grids_unchecked(grids)?;
        field.check_simplex(SIMPLEX_TOL)?;
        Ok(field)
    }

    /// Checks phase count and shapes only. Callers guarantee simplex feasibility.
    pub(crate) fn from_grids_unchecked(grids: Vec<ImageGrid>) -> Result<Self> {
        if grids.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a membership field needs at least 2 phases, got {}",
                grids.len()
            )));
        }
        for g in &grids[1..] {
            grids[0].check_shape(g)?;
        }
        Ok(Self { grids })
    }

    /// Uniform membership `1/N` everywhere.
    pub fn uniform(phases: usize, height: usize, width: usize) -> Result<Self> {
        let w = 1.0 / phases as f64;
        Self::from_grids_unchecked(vec![ImageGrid::filled(height, width, w); phases])
    }

    /// Verifies the per-pixel simplex constraints.
    pub fn check_simplex(&self, tol: f64) -> Result<()> {
        for px in 0..self.grids[0].len() {
            let mut sum = 0.0;
            for g in &self.grids {
                let v = g.data[px];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "membership {v} outside [0, 1] at pixel index {px}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "memberships sum to {sum} at pixel index {px}"
                )));
            }
        }
        Ok(())
    }

    pub fn phases(&self) -> usize {
        self.grids.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grids[0].shape()
    }

    pub fn grids(&self) -> &[ImageGrid] {
        &self.grids
    }

    pub fn phase(&self, k: usize) -> &ImageGrid {
        &self.grids[k]
    }

    pub fn into_grids(self) -> Vec<ImageGrid> {
        self.grids
    }

    /// Memberships of every phase at flat pixel index `px`.
    pub fn pixel(&self, px: usize) -> Vec<f64> {
        self.grids.iter().map(|g| g.data[px]).collect()
    }

    /// Frobenius norm over all phases.
    pub fn frobenius_norm(&self) -> f64 {
        self.grids.iter().map(ImageGrid::norm_sq).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.grids
            .iter()
            .zip(&other.grids)
            .map(|(a, b)| {
                a.data
                    .iter()
                    .zip(&b.data)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Hard labels by per-pixel argmax, ties going to the lowest phase index.
    pub fn to_label_mask(&self) -> LabelMask {
        let (h, w) = self.shape();
        let labels = (0..h * w)
            .map(|px| {
                let mut best = 0;
                let mut best_val = self.grids[0].data[px];
                for (k, g) in self.grids.iter().enumerate().skip(1) {
                    if g.data[px] > best_val {
                        best = k;
                        best_val = g.data[px];
                    }
                }
                best
            })
            .collect();
        LabelMask {
            height: h,
            width: w,
            phases: self.phases(),
            labels,
        }
    }
}

/// Hard segmentation: one phase index in `0..phases` per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    phases: usize,
    labels: Vec<usize>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, phases: usize, labels: Vec<usize>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("mask dimensions must be positive".into()));
        }
        if labels.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= phases) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {phases} phases"
            )));
        }
        Ok(Self {
            height,
            width,
            phases,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.labels[i * self.width + j]
    }

    /// One-hot membership field with `phases` phases.
    pub fn to_membership(&self, phases: usize) -> Result<MembershipField> {
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= phases) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {phases} phases"
            )));
        }
        let grids = (0..phases)
            .map(|k| {
                ImageGrid::from_raw(
                    self.height,
                    self.width,
                    self.labels
                        .iter()
                        .map(|&l| if l == k { 1.0 } else { 0.0 })
                        .collect(),
                )
            })
            .collect();
        MembershipField::from_grids_unchecked(grids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(h: usize, w: usize, data: &[f64]) -> ImageGrid {
        ImageGrid::new(h, w, data.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(ImageGrid::new(0, 3, vec![]).is_err());
        assert!(ImageGrid::new(2, 2, vec![1.0; 3]).is_err());
        assert!(ImageGrid::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(ImageGrid::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let g = grid(1, 4, &[104.0, 191.0, 191.0, 104.0]);
        assert_eq!(g.normalize().as_slice(), &[0.0, 1.0, 1.0, 0.0]);

        let c = grid(2, 2, &[5.0; 4]);
        assert_eq!(c.normalize().as_slice(), &[0.0; 4]);

        let id = grid(1, 3, &[0.0, 0.5, 1.0]);
        assert_eq!(id.normalize().as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn zero_variance_noise_is_identity() {
        let g = grid(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let out = g.add_gaussian_noise(&NoiseSpec::new(0.0, 0.0, 7).unwrap()).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(NoiseSpec::new(0.0, -0.01, 1).is_err());
        let g = ImageGrid::zeros(2, 2);
        let bad = NoiseSpec {
            mean: 0.0,
            variance: -1.0,
            seed: 0,
        };
        assert!(g.add_gaussian_noise(&bad).is_err());
    }

    #[test]
    fn noise_statistics() {
        let n = 256;
        let g = ImageGrid::zeros(n, n);
        let out = g.add_gaussian_noise(&NoiseSpec::new(0.0, 0.01, 42).unwrap()).unwrap();
        let count = (n * n) as f64;
        let mean = out.sum() / count;
        let var = out.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(mean.abs() < 4.0 * 0.1 / 256.0, "mean {mean}");
        assert!((var - 0.01).abs() < 0.001, "variance {var}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let g = ImageGrid::from_fn(8, 8, |i, j| (i * j) as f64);
        let spec = NoiseSpec::new(0.0, 0.04, 3).unwrap();
        let a = g.add_gaussian_noise(&spec).unwrap();
        let b = g.add_gaussian_noise(&spec).unwrap();
        assert_eq!(a, b);
        let other = g.add_gaussian_noise(&NoiseSpec { seed: 4, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    fn field(pixels: &[&[f64]]) -> MembershipField {
        let n = pixels[0].len();
        let grids = (0..n)
            .map(|k| grid(1, pixels.len(), &pixels.iter().map(|p| p[k]).collect::<Vec<_>>()))
            .collect();
        MembershipField::new(grids).unwrap()
    }

    #[test]
    fn argmax_labels() {
        assert_eq!(field(&[&[0.1, 0.9]]).to_label_mask().labels(), &[1]);
        assert_eq!(field(&[&[0.5, 0.5]]).to_label_mask().labels(), &[0]);
        assert_eq!(field(&[&[0.2, 0.3, 0.5]]).to_label_mask().labels(), &[2]);
    }

    #[test]
    fn one_hot_membership() {
        let mask = LabelMask::new(1, 2, 2, vec![0, 1]).unwrap();
        let u = mask.to_membership(2).unwrap();
        assert_eq!(u.phase(0).as_slice(), &[1.0, 0.0]);
        assert_eq!(u.phase(1).as_slice(), &[0.0, 1.0]);

        let zeros = LabelMask::new(2, 2, 3, vec![0; 4]).unwrap();
        let u = zeros.to_membership(3).unwrap();
        assert_eq!(u.phase(0).as_slice(), &[1.0; 4]);
        assert_eq!(u.phase(1).as_slice(), &[0.0; 4]);
        assert_eq!(u.phase(2).as_slice(), &[0.0; 4]);

        let two = LabelMask::new(1, 1, 3, vec![2]).unwrap();
        assert!(two.to_membership(2).is_err());
        assert!(LabelMask::new(1, 1, 2, vec![2]).is_err());
    }

    #[test]
    fn membership_validation() {
        assert!(MembershipField::new(vec![grid(1, 1, &[0.6]), grid(1, 1, &[0.6])]).is_err());
        assert!(MembershipField::new(vec![grid(1, 1, &[1.2]), grid(1, 1, &[-0.2])]).is_err());
        assert!(MembershipField::new(vec![grid(1, 1, &[1.0])]).is_err());
        assert!(MembershipField::new(vec![grid(1, 1, &[1.0]), grid(1, 2, &[0.0, 0.0])]).is_err());
        assert!(MembershipField::uniform(4, 3, 3).unwrap().check_simplex(1e-12).is_ok());
    }
}
