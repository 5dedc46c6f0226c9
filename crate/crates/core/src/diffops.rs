//! Periodic finite differences and the FFT solve of `(b1 I - b2 Lap) v = rhs`.
//!
//! `gradient` uses forward differences with wraparound and `divergence` is its
//! exact negative adjoint, so `laplacian = divergence . gradient` is the
//! standard 5-point periodic Laplacian whose Fourier multipliers are
//! `2 cos(2 pi i / m) + 2 cos(2 pi j / n) - 4`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// A discrete vector field `(horizontal, vertical)` on an image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub gx: ImageGrid,
    pub gy: ImageGrid,
}

impl GradientField {
    pub fn new(gx: ImageGrid, gy: ImageGrid) -> Result<Self> {
        gx.check_shape(&gy)?;
        Ok(Self { gx, gy })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            gx: ImageGrid::zeros(height, width),
            gy: ImageGrid::zeros(height, width),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.gx.shape()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.gx.dot(&other.gx) + self.gy.dot(&other.gy)
    }

    pub fn norm_sq(&self) -> f64 {
        self.gx.norm_sq() + self.gy.norm_sq()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self + scale * other`, componentwise.
    pub fn axpy(&self, scale: f64, other: &Self) -> Self {
        Self {
            gx: ImageGrid::from_raw(
                self.gx.height(),
                self.gx.width(),
                self.gx
                    .as_slice()
                    .iter()
                    .zip(other.gx.as_slice())
                    .map(|(a, b)| a + scale * b)
                    .collect(),
            ),
            gy: ImageGrid::from_raw(
                self.gy.height(),
                self.gy.width(),
                self.gy
                    .as_slice()
                    .iter()
                    .zip(other.gy.as_slice())
                    .map(|(a, b)| a + scale * b)
                    .collect(),
            ),
        }
    }
}

/// Forward differences with periodic wraparound.
pub fn gradient(u: &ImageGrid) -> GradientField {
    let (m, n) = u.shape();
    let gx = ImageGrid::from_fn(m, n, |i, j| u.get(i, (j + 1) % n) - u.get(i, j));
    let gy = ImageGrid::from_fn(m, n, |i, j| u.get((i + 1) % m, j) - u.get(i, j));
    GradientField { gx, gy }
}

/// Negative adjoint of [`gradient`]: `<grad u, g> = -<u, div g>`.
pub fn divergence(g: &GradientField) -> Result<ImageGrid> {
    g.gx.check_shape(&g.gy)?;
    let (m, n) = g.shape();
    Ok(ImageGrid::from_fn(m, n, |i, j| {
        let left = (j + n - 1) % n;
        let up = (i + m - 1) % m;
        g.gx.get(i, j) - g.gx.get(i, left) + g.gy.get(i, j) - g.gy.get(up, j)
    }))
}

/// Periodic 5-point Laplacian, `div(grad u)`.
pub fn laplacian(u: &ImageGrid) -> ImageGrid {
    let (m, n) = u.shape();
    ImageGrid::from_fn(m, n, |i, j| {
        u.get((i + 1) % m, j)
            + u.get((i + m - 1) % m, j)
            + u.get(i, (j + 1) % n)
            + u.get(i, (j + n - 1) % n)
            - 4.0 * u.get(i, j)
    })
}

/// Spatial-domain application of `b1 I - b2 Lap`.
pub fn apply_screened_laplacian(v: &ImageGrid, beta1: f64, beta2: f64) -> ImageGrid {
    let lap = laplacian(v);
    ImageGrid::from_raw(
        v.height(),
        v.width(),
        v.as_slice()
            .iter()
            .zip(lap.as_slice())
            .map(|(x, l)| beta1 * x - beta2 * l)
            .collect(),
    )
}

/// Fourier multipliers of the periodic Laplacian together with the FFT plans
/// for that grid size. Plans are `Send + Sync` and reusable from any thread.
#[derive(Clone)]
pub struct LaplacianSpectrum {
    height: usize,
    width: usize,
    eigenvalues: Vec<f64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for LaplacianSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaplacianSpectrum")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl LaplacianSpectrum {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "spectrum dimensions must be positive, got {height}x{width}"
            )));
        }
        let cy: Vec<f64> = (0..height)
            .map(|i| 2.0 * (2.0 * PI * i as f64 / height as f64).cos())
            .collect();
        let cx: Vec<f64> = (0..width)
            .map(|j| 2.0 * (2.0 * PI * j as f64 / width as f64).cos())
            .collect();
        let mut eigenvalues = Vec::with_capacity(height * width);
        for &a in &cy {
            for &b in &cx {
                // clamp keeps the zero mode exactly zero against cos roundoff
                eigenvalues.push((a + b - 4.0).min(0.0));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            height,
            width,
            eigenvalues,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Eigenvalue for frequency `(i, j)`, in `[-8, 0]`.
    pub fn eigenvalue(&self, i: usize, j: usize) -> f64 {
        self.eigenvalues[i * self.width + j]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn fft2(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        rows.process(buf);
        let mut t = transpose(buf, self.height, self.width);
        cols.process(&mut t);
        let back = transpose(&t, self.width, self.height);
        buf.copy_from_slice(&back);
    }

    /// Solves `(beta1 I - beta2 Lap) v = rhs` by diagonalizing in Fourier space.
    pub fn solve_screened_poisson(&self, rhs: &ImageGrid, beta1: f64, beta2: f64) -> Result<ImageGrid> {
        if !(beta1 > 0.0) || !beta1.is_finite() {
            return Err(Error::param("beta1", format!("must be positive, got {beta1}")));
        }
        if !(beta2 >= 0.0) || !beta2.is_finite() {
            return Err(Error::param("beta2", format!("must be nonnegative, got {beta2}")));
        }
        if rhs.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: rhs.shape(),
            });
        }
        let mut buf: Vec<Complex<f64>> = rhs.as_slice().iter().map(|&r| Complex::new(r, 0.0)).collect();
        self.fft2(&mut buf, false);
        let scale = 1.0 / (self.height * self.width) as f64;
        for (z, &ev) in buf.iter_mut().zip(&self.eigenvalues) {
            *z *= scale / (beta1 - beta2 * ev);
        }
        self.fft2(&mut buf, true);
        Ok(ImageGrid::from_raw(
            self.height,
            self.width,
            buf.into_iter().map(|z| z.re).collect(),
        ))
    }
}

/// Shorthand for [`LaplacianSpectrum::new`].
pub fn laplacian_spectrum(height: usize, width: usize) -> Result<LaplacianSpectrum> {
    LaplacianSpectrum::new(height, width)
}

/// Shorthand for [`LaplacianSpectrum::solve_screened_poisson`].
pub fn solve_screened_poisson(
    rhs: &ImageGrid,
    beta1: f64,
    beta2: f64,
    spectrum: &LaplacianSpectrum,
) -> Result<ImageGrid> {
    spectrum.solve_screened_poisson(rhs, beta1, beta2)
}

fn transpose(src: &[Complex<f64>], rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); src.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = src[i * cols + j];
        }
    }
    out
}
