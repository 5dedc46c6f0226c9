//! ADMM solver for the fuzzy piecewise-constant model with TTV (or TV)
//! regularization.
//!
//! The splitting introduces `V = U` and `D_k = grad v_k`, with multipliers
//! `p` and `q_k`. One iteration updates, in this order:
//!
//! 1. `U <- proj_S(V - (F + p) / beta1)` where `F_k = (f - c_k)^2`;
//! 2. `d_k <- prox_{(lam / beta2) R}(grad v_k + q_k / beta2)`;
//! 3. `v_k <- (beta1 I - beta2 Lap)^{-1} (p_k + beta1 u_k + div(q_k - beta2 d_k))`;
//! 4. `p <- p + beta1 (U - V)`, `q_k <- q_k + beta2 (grad v_k - d_k)`;
//! 5. `c_k <- sum f u_k / sum u_k`.
//!
//! Iteration stops once `||U^t - U^{t-1}||_F / ||U^t||_F <= tol` or after
//! `max_iter` iterations.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffops::{divergence, gradient, GradientField, LaplacianSpectrum};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LabelMask, MembershipField};
use crate::prox::{l21_prox_field, project_membership, rho_a, tl1_prox_field, TL1Params};

/// Membership sums below this keep the previous centroid.
pub const EMPTY_PHASE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// Anisotropic transformed total variation.
    Ttv,
    /// Isotropic total variation.
    Tv,
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regularizer::Ttv => "ttv",
            Regularizer::Tv => "tv",
        })
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ttv" => Ok(Regularizer::Ttv),
            "tv" => Ok(Regularizer::Tv),
            other => Err(Error::param("regularizer", format!("unknown regularizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub phases: usize,
    pub lam: f64,
    /// TL1 sparsity parameter; unused by [`Regularizer::Tv`].
    pub a: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub regularizer: Regularizer,
}

impl SolverConfig {
    pub const DEFAULT_BETA: f64 = 0.25;
    pub const DEFAULT_MAX_ITER: usize = 200;
    pub const DEFAULT_TOL: f64 = 1e-4;

    pub fn ttv(phases: usize, lam: f64, a: f64) -> Self {
        Self {
            phases,
            lam,
            a,
            beta1: Self::DEFAULT_BETA,
            beta2: Self::DEFAULT_BETA,
            max_iter: Self::DEFAULT_MAX_ITER,
            tol: Self::DEFAULT_TOL,
            regularizer: Regularizer::Ttv,
        }
    }

    pub fn tv(phases: usize, lam: f64) -> Self {
        Self {
            regularizer: Regularizer::Tv,
            ..Self::ttv(phases, lam, 1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases < 2 {
            return Err(Error::param("phases", format!("need at least 2, got {}", self.phases)));
        }
        let positive = [
            ("lam", self.lam),
            ("a", self.a),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("tol", self.tol),
        ];
        for (name, value) in positive {
            // lam = 0 is allowed: the model reduces to a pure fidelity fit
            let ok = if name == "lam" { value >= 0.0 } else { value > 0.0 };
            if !ok || value.is_nan() || (name != "tol" && value.is_infinite()) {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }

    fn reg_weight(&self, g: &GradientField) -> f64 {
        match self.regularizer {
            Regularizer::Ttv => g
                .gx
                .as_slice()
                .iter()
                .chain(g.gy.as_slice())
                .map(|&t| rho_a(t, self.a))
                .sum(),
            Regularizer::Tv => g
                .gx
                .as_slice()
                .iter()
                .zip(g.gy.as_slice())
                .map(|(x, y)| x.hypot(*y))
                .sum(),
        }
    }
}

/// Primal feasibility of the splitting after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalResidual {
    /// `||U - V||_F`.
    pub membership: f64,
    /// `sum_k ||grad v_k - d_k||_F`.
    pub gradient: f64,
}

/// All ADMM iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: MembershipField,
    pub v: Vec<ImageGrid>,
    pub d: Vec<GradientField>,
    pub p: Vec<ImageGrid>,
    pub q: Vec<GradientField>,
    pub c: Vec<f64>,
    pub iter: usize,
    pub rel_change_history: Vec<f64>,
    pub residual_history: Vec<PrimalResidual>,
}

impl SolverState {
    /// `V = U0`, `D = grad V`, zero multipliers.
    pub fn new(f: &ImageGrid, u0: MembershipField, c0: Vec<f64>) -> Result<Self> {
        if u0.shape() != f.shape() {
            return Err(Error::ShapeMismatch {
                expected: f.shape(),
                found: u0.shape(),
            });
        }
        if c0.len() != u0.phases() {
            return Err(Error::InvalidInput(format!(
                "{} centroids for {} phases",
                c0.len(),
                u0.phases()
            )));
        }
        if c0.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("centroids must be finite".into()));
        }
        let (h, w) = f.shape();
        let n = u0.phases();
        let v = u0.grids().to_vec();
        let d = v.iter().map(gradient).collect();
        Ok(Self {
            u: u0,
            v,
            d,
            p: vec![ImageGrid::zeros(h, w); n],
            q: vec![GradientField::zeros(h, w); n],
            c: c0,
            iter: 0,
            rel_change_history: Vec::new(),
            residual_history: Vec::new(),
        })
    }

    pub fn phases(&self) -> usize {
        self.u.phases()
    }
}

/// Membership step: simplex projection of `V - (F + p) / beta1`.
pub fn update_u(state: &SolverState, f: &ImageGrid, config: &SolverConfig) -> Result<MembershipField> {
    let beta1 = config.beta1;
    let raw: Vec<ImageGrid> = state
        .v
        .iter()
        .zip(&state.p)
        .zip(&state.c)
        .map(|((v, p), &c)| {
            ImageGrid::from_raw(
                f.height(),
                f.width(),
                v.as_slice()
                    .iter()
                    .zip(p.as_slice())
                    .zip(f.as_slice())
                    .map(|((&v, &p), &fv)| v - ((fv - c) * (fv - c) + p) / beta1)
                    .collect(),
            )
        })
        .collect();
    project_membership(&raw)
}

/// Auxiliary gradient step: prox of the regularizer at `grad v_k + q_k / beta2`.
pub fn update_d(state: &SolverState, config: &SolverConfig) -> Result<Vec<GradientField>> {
    let scale = config.lam / config.beta2;
    let tl1 = match config.regularizer {
        Regularizer::Ttv => Some(TL1Params::new(config.a, scale)?),
        Regularizer::Tv => None,
    };
    Ok(state
        .v
        .iter()
        .zip(&state.q)
        .map(|(v, q)| {
            let w = gradient(v).axpy(1.0 / config.beta2, q);
            match &tl1 {
                Some(params) => tl1_prox_field(&w, params),
                None => l21_prox_field(&w, scale),
            }
        })
        .collect())
}

/// Splitting-variable step, solved exactly in Fourier space. Reads `u` and
/// `d` from `state`, which must already hold the current iteration's values.
pub fn update_v(
    state: &SolverState,
    config: &SolverConfig,
    spectrum: &LaplacianSpectrum,
) -> Result<Vec<ImageGrid>> {
    let (beta1, beta2) = (config.beta1, config.beta2);
    state
        .u
        .grids()
        .iter()
        .zip(&state.p)
        .zip(state.q.iter().zip(&state.d))
        .map(|((u, p), (q, d))| {
            let div = divergence(&q.axpy(-beta2, d))?;
            let rhs = ImageGrid::from_raw(
                u.height(),
                u.width(),
                p.as_slice()
                    .iter()
                    .zip(u.as_slice())
                    .zip(div.as_slice())
                    .map(|((&p, &u), &dv)| p + beta1 * u + dv)
                    .collect(),
            );
            spectrum.solve_screened_poisson(&rhs, beta1, beta2)
        })
        .collect()
}

/// Dual ascent on both multipliers.
pub fn update_multipliers(state: &SolverState, config: &SolverConfig) -> (Vec<ImageGrid>, Vec<GradientField>) {
    let p = state
        .p
        .iter()
        .zip(state.u.grids())
        .zip(&state.v)
        .map(|((p, u), v)| {
            ImageGrid::from_raw(
                p.height(),
                p.width(),
                p.as_slice()
                    .iter()
                    .zip(u.as_slice())
                    .zip(v.as_slice())
                    .map(|((&p, &u), &v)| p + config.beta1 * (u - v))
                    .collect(),
            )
        })
        .collect();
    let q = state
        .q
        .iter()
        .zip(&state.v)
        .zip(&state.d)
        .map(|((q, v), d)| {
            let gv = gradient(v);
            q.axpy(config.beta2, &gv.axpy(-1.0, d))
        })
        .collect();
    (p, q)
}

/// Membership-weighted means of `f`. Phases with (almost) no mass keep their
/// previous centroid.
pub fn update_c(state: &SolverState, f: &ImageGrid) -> Vec<f64> {
    state
        .u
        .grids()
        .iter()
        .zip(&state.c)
        .map(|(u, &prev)| {
            let mass = u.sum();
            if mass < EMPTY_PHASE_MASS {
                prev
            } else {
                u.dot(f) / mass
            }
        })
        .collect()
}

/// Model objective `sum_k <(f - c_k)^2, u_k> + lam * R(grad u_k)`.
pub fn energy(u: &MembershipField, c: &[f64], f: &ImageGrid, config: &SolverConfig) -> f64 {
    u.grids()
        .iter()
        .zip(c)
        .map(|(uk, &ck)| {
            let fidelity: f64 = uk
                .as_slice()
                .iter()
                .zip(f.as_slice())
                .map(|(&u, &fv)| (fv - ck) * (fv - ck) * u)
                .sum();
            let reg = if config.lam == 0.0 {
                0.0
            } else {
                config.lam * config.reg_weight(&gradient(uk))
            };
            fidelity + reg
        })
        .sum()
}

/// Result of [`Solver::solve`].
#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub membership: MembershipField,
    pub centroids: Vec<f64>,
    pub iterations: usize,
    pub rel_change_history: Vec<f64>,
    pub residual_history: Vec<PrimalResidual>,
    pub energy: f64,
    pub seconds: f64,
}

impl SolverOutcome {
    pub fn labels(&self) -> LabelMask {
        self.membership.to_label_mask()
    }

    /// Last recorded relative change, or `None` if no iteration ran.
    pub fn final_rel_change(&self) -> Option<f64> {
        self.rel_change_history.last().copied()
    }
}

/// An image bound to a validated configuration and the FFT plans for its size.
#[derive(Debug, Clone)]
pub struct Solver {
    f: ImageGrid,
    config: SolverConfig,
    spectrum: LaplacianSpectrum,
}

impl Solver {
    pub fn new(f: ImageGrid, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let spectrum = LaplacianSpectrum::new(f.height(), f.width())?;
        Ok(Self { f, config, spectrum })
    }

    pub fn image(&self) -> &ImageGrid {
        &self.f
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn spectrum(&self) -> &LaplacianSpectrum {
        &self.spectrum
    }

    pub fn init_state(&self, u0: MembershipField, c0: Vec<f64>) -> Result<SolverState> {
        if u0.phases() != self.config.phases {
            return Err(Error::InvalidInput(format!(
                "initial membership has {} phases, config expects {}",
                u0.phases(),
                self.config.phases
            )));
        }
        SolverState::new(&self.f, u0, c0)
    }

    /// One full ADMM iteration. Returns the relative membership change.
    pub fn step(&self, state: &mut SolverState) -> Result<f64> {
        let cfg = &self.config;
        let new_u = update_u(state, &self.f, cfg)?;
        let change = new_u.distance(&state.u);
        state.u = new_u;
        state.d = update_d(state, cfg)?;
        state.v = update_v(state, cfg, &self.spectrum)?;
        let (p, q) = update_multipliers(state, cfg);
        state.p = p;
        state.q = q;
        state.c = update_c(state, &self.f);
        state.iter += 1;

        let norm = state.u.frobenius_norm();
        let rel = if norm == 0.0 { 0.0 } else { change / norm };
        state.rel_change_history.push(rel);
        state.residual_history.push(primal_residual(state));
        Ok(rel)
    }

    /// Runs until the relative membership change drops to `tol` or `max_iter`
    /// iterations have run. `observe` sees the state after every iteration.
    pub fn solve_observed(
        &self,
        u0: MembershipField,
        c0: Vec<f64>,
        mut observe: impl FnMut(&SolverState),
    ) -> Result<SolverOutcome> {
        let start = Instant::now();
        let mut state = self.init_state(u0, c0)?;
        // the first check compares against an implicit +inf change, so at
        // least one iteration runs whenever max_iter > 0
        while state.iter < self.config.max_iter {
            let rel = self.step(&mut state)?;
            observe(&state);
            if rel <= self.config.tol {
                break;
            }
        }
        let energy = energy(&state.u, &state.c, &self.f, &self.config);
        Ok(SolverOutcome {
            membership: state.u,
            centroids: state.c,
            iterations: state.iter,
            rel_change_history: state.rel_change_history,
            residual_history: state.residual_history,
            energy,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn solve(&self, u0: MembershipField, c0: Vec<f64>) -> Result<SolverOutcome> {
        self.solve_observed(u0, c0, |_| {})
    }
}

fn primal_residual(state: &SolverState) -> PrimalResidual {
    let membership = state
        .u
        .grids()
        .iter()
        .zip(&state.v)
        .map(|(u, v)| {
            u.as_slice()
                .iter()
                .zip(v.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt();
    let gradient = state
        .v
        .iter()
        .zip(&state.d)
        .map(|(v, d)| gradient(v).axpy(-1.0, d).norm())
        .sum();
    PrimalResidual { membership, gradient }
}
