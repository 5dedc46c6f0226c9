//! Multiphase image segmentation with a fuzzy-membership piecewise-constant
//! model regularized by transformed total variation (TTV).
//!
//! The model minimizes, over memberships `U = (u_1, .., u_N)` constrained to
//! the per-pixel probability simplex and phase centroids `c`,
//!
//! ```text
//! sum_k <(f - c_k)^2, u_k> + lambda * ||grad u_k||_TL1(a)
//! ```
//!
//! with an ADMM splitting whose subproblems are a simplex projection, a
//! closed-form transformed-l1 proximal step and an FFT screened Poisson
//! solve. An isotropic TV variant of the same solver is provided as a
//! baseline.
//!
//! ```
//! use ttvseg::phantom;
//! use ttvseg::{fuzzy_cmeans, FcmConfig, Solver, SolverConfig};
//!
//! let (f, _truth) = phantom::two_phase_disk(32, 32);
//! let f = f.normalize();
//! let init = fuzzy_cmeans(&f, &FcmConfig::new(2)).unwrap();
//! let solver = Solver::new(f, SolverConfig::ttv(2, 0.01, 10.0)).unwrap();
//! let outcome = solver.solve(init.membership, init.centroids).unwrap();
//! assert_eq!(outcome.labels().phases(), 2);
//! ```

pub mod diffops;
pub mod error;
pub mod fcm;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod prox;
pub mod solver;

pub use diffops::{GradientField, LaplacianSpectrum};
pub use error::{Error, Result};
pub use fcm::{fuzzy_cmeans, FcmConfig, FcmResult};
pub use grid::{ImageGrid, LabelMask, MembershipField, NoiseSpec};
pub use metrics::{dice, jaccard, score_all, RegionScore, ScoreSummary};
pub use prox::TL1Params;
pub use solver::{Regularizer, Solver, SolverConfig, SolverOutcome, SolverState};
