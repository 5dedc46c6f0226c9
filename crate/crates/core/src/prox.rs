//! Proximal maps used by the ADMM subproblems.
//!
//! * the transformed-l1 (TL1) penalty `rho_a(t) = (a + 1)|t| / (a + |t|)` and
//!   its closed-form scalar proximal map, applied componentwise (anisotropic);
//! * isotropic l2,1 shrinkage for the TV baseline;
//! * Euclidean projection onto the probability simplex.

use crate::diffops::GradientField;
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, MembershipField};

/// Transformed-l1 penalty `(a + 1)|t| / (a + |t|)`.
#[inline]
pub fn rho_a(t: f64, a: f64) -> f64 {
    let abs = t.abs();
    (a + 1.0) * abs / (a + abs)
}

/// Parameters of `prox_{lam * TL1(a)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TL1Params {
    a: f64,
    lam: f64,
}

impl TL1Params {
    pub fn new(a: f64, lam: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param("a", format!("must be positive, got {a}")));
        }
        if !(lam >= 0.0) || !lam.is_finite() {
            return Err(Error::param("lam", format!("must be nonnegative, got {lam}")));
        }
        Ok(Self { a, lam })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    /// Scalar objective `lam * rho_a(y) + (y - t)^2 / 2` minimized by the prox.
    pub fn objective(&self, y: f64, t: f64) -> f64 {
        self.lam * rho_a(y, self.a) + 0.5 * (y - t) * (y - t)
    }
}

/// Threshold below which the TL1 prox returns zero.
pub fn tl1_threshold(params: &TL1Params) -> f64 {
    let TL1Params { a, lam } = *params;
    if lam > a * a / (2.0 * (a + 1.0)) {
        (2.0 * lam * (a + 1.0)).sqrt() - a / 2.0
    } else {
        lam * (a + 1.0) / a
    }
}

/// `argmin_y lam * rho_a(y) + (y - t)^2 / 2`, by the cubic-root closed form.
pub fn tl1_prox_scalar(t: f64, params: &TL1Params) -> f64 {
    let TL1Params { a, lam } = *params;
    if lam == 0.0 {
        return t;
    }
    let abs = t.abs();
    if abs <= tl1_threshold(params) {
        return 0.0;
    }
    let s = a + abs;
    let arg = (1.0 - 27.0 * lam * a * (a + 1.0) / (2.0 * s * s * s)).clamp(-1.0, 1.0);
    let phi = arg.acos();
    let mag = 2.0 / 3.0 * s * (phi / 3.0).cos() - 2.0 * a / 3.0 + abs / 3.0;
    mag.copysign(t)
}

/// Componentwise TL1 prox on both gradient components.
pub fn tl1_prox_field(g: &GradientField, params: &TL1Params) -> GradientField {
    GradientField {
        gx: g.gx.map(|t| tl1_prox_scalar(t, params)),
        gy: g.gy.map(|t| tl1_prox_scalar(t, params)),
    }
}

/// Pixelwise isotropic shrinkage `max(r - lam, 0) / r * (gx, gy)`.
pub fn l21_prox_field(g: &GradientField, lam: f64) -> GradientField {
    let mut out = g.clone();
    for (x, y) in out
        .gx
        .as_mut_slice()
        .iter_mut()
        .zip(out.gy.as_mut_slice().iter_mut())
    {
        let (sx, sy) = l21_prox_pixel(*x, *y, lam);
        *x = sx;
        *y = sy;
    }
    out
}

#[inline]
pub fn l21_prox_pixel(x: f64, y: f64, lam: f64) -> (f64, f64) {
    let r = x.hypot(y);
    if r == 0.0 || r <= lam {
        return (0.0, 0.0);
    }
    let scale = (r - lam) / r;
    (scale * x, scale * y)
}

/// Euclidean projection onto `{x : x_k >= 0, sum x_k = 1}` via sort-and-threshold.
pub fn project_simplex(y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    let mut out = y.to_vec();
    project_simplex_in_place(&mut out);
    Ok(out)
}

pub(crate) fn project_simplex_in_place(x: &mut [f64]) {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Projects every pixel's phase vector onto the simplex.
pub fn project_membership(raw: &[ImageGrid]) -> Result<MembershipField> {
    let first = raw
        .first()
        .ok_or_else(|| Error::InvalidInput("no phases to project".into()))?;
    for g in &raw[1..] {
        first.check_shape(g)?;
    }
    let n = raw.len();
    let (h, w) = first.shape();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(h * w); n];
    let mut buf = vec![0.0; n];
    for px in 0..h * w {
        for (b, g) in buf.iter_mut().zip(raw) {
            *b = g.as_slice()[px];
        }
        project_simplex_in_place(&mut buf);
        for (o, &b) in out.iter_mut().zip(&buf) {
            o.push(b);
        }
    }
    MembershipField::from_grids_unchecked(
        out.into_iter()
            .map(|d| ImageGrid::from_raw(h, w, d))
            .collect(),
    )
}
