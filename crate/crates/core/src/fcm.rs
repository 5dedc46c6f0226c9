//! Fuzzy c-means clustering of pixel intensities, used to initialize the
//! ADMM solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, MembershipField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    pub clusters: usize,
    /// Fuzzifier exponent `m > 1`.
    pub fuzzifier: f64,
    pub max_iter: usize,
    /// Stop once no centroid moves by more than this.
    pub tol: f64,
    /// Seeds the extra random initializations requested by `restarts`.
    pub seed: u64,
    /// Random restarts on top of the deterministic quantile start. The run
    /// with the lowest objective wins.
    pub restarts: usize,
}

impl FcmConfig {
    pub fn new(clusters: usize) -> Self {
        Self {
            clusters,
            fuzzifier: 2.0,
            max_iter: 100,
            tol: 1e-5,
            seed: 0,
            restarts: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.clusters < 2 {
            return Err(Error::param("clusters", format!("need at least 2, got {}", self.clusters)));
        }
        if !(self.fuzzifier > 1.0) || !self.fuzzifier.is_finite() {
            return Err(Error::param("fuzzifier", format!("must exceed 1, got {}", self.fuzzifier)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("tol", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FcmResult {
    pub membership: MembershipField,
    /// Sorted ascending; `membership` phase `k` belongs to `centroids[k]`.
    pub centroids: Vec<f64>,
    pub iterations: usize,
    /// FCM objective after each centroid update.
    pub objective_history: Vec<f64>,
}

impl FcmResult {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Runs fuzzy c-means on the intensities of `f`.
pub fn fuzzy_cmeans(f: &ImageGrid, config: &FcmConfig) -> Result<FcmResult> {
    config.validate()?;
    let data = f.as_slice();
    let mut best = run_from(data, quantile_centroids(data, config.clusters), config);

    if config.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (lo, hi) = (f.min(), f.max());
        for _ in 0..config.restarts {
            let start: Vec<f64> = (0..config.clusters)
                .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect();
            let run = run_from(data, start, config);
            if run.objective < best.objective {
                best = run;
            }
        }
    }

    let Run {
        mut centroids,
        mut memberships,
        iterations,
        history,
        ..
    } = best;

    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]).then(a.cmp(&b)));
    centroids = order.iter().map(|&k| centroids[k]).collect();
    memberships = order.iter().map(|&k| std::mem::take(&mut memberships[k])).collect();

    let (h, w) = f.shape();
    let grids = memberships
        .into_iter()
        .map(|m| ImageGrid::from_raw(h, w, m))
        .collect();
    Ok(FcmResult {
        membership: MembershipField::from_grids_unchecked(grids)?,
        centroids,
        iterations,
        objective_history: history,
    })
}

/// `N` evenly spaced quantiles (at `(k + 1/2) / N`) of the intensities.
pub fn quantile_centroids(data: &[f64], clusters: usize) -> Vec<f64> {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    (0..clusters)
        .map(|k| {
            let pos = ((k as f64 + 0.5) / clusters as f64 * sorted.len() as f64) as usize;
            sorted[pos.min(sorted.len() - 1)]
        })
        .collect()
}

struct Run {
    centroids: Vec<f64>,
    memberships: Vec<Vec<f64>>,
    iterations: usize,
    history: Vec<f64>,
    objective: f64,
}

fn run_from(data: &[f64], mut centroids: Vec<f64>, config: &FcmConfig) -> Run {
    let m = config.fuzzifier;
    let mut memberships = vec![vec![0.0; data.len()]; centroids.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < config.max_iter {
        update_memberships(data, &centroids, m, &mut memberships);
        let next: Vec<f64> = memberships
            .iter()
            .zip(&centroids)
            .map(|(u, &prev)| {
                let (mut num, mut den) = (0.0, 0.0);
                for (&uk, &x) in u.iter().zip(data) {
                    let w = uk.powf(m);
                    num += w * x;
                    den += w;
                }
                if den > 0.0 {
                    num / den
                } else {
                    prev
                }
            })
            .collect();
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;
        history.push(objective(data, &centroids, &memberships, m));
        if shift < config.tol {
            break;
        }
    }
    update_memberships(data, &centroids, m, &mut memberships);
    let objective = objective(data, &centroids, &memberships, m);
    Run {
        centroids,
        memberships,
        iterations,
        history,
        objective,
    }
}

/// `u_k = 1 / sum_j (d_k / d_j)^(2 / (m - 1))`, evaluated relative to the
/// nearest centroid. A pixel sitting exactly on a centroid belongs fully to
/// the lowest-indexed such centroid.
fn update_memberships(data: &[f64], centroids: &[f64], m: f64, out: &mut [Vec<f64>]) {
    let exponent = 2.0 / (m - 1.0);
    let n = centroids.len();
    let mut ratio = vec![0.0; n];
    for (px, &x) in data.iter().enumerate() {
        let mut nearest = 0;
        let mut d_min = f64::INFINITY;
        for (k, &c) in centroids.iter().enumerate() {
            let d = (x - c).abs();
            if d < d_min {
                d_min = d;
                nearest = k;
            }
        }
        if d_min == 0.0 {
            for (k, u) in out.iter_mut().enumerate() {
                u[px] = if k == nearest { 1.0 } else { 0.0 };
            }
            continue;
        }
        let mut total = 0.0;
        for (r, &c) in ratio.iter_mut().zip(centroids) {
            *r = (d_min / (x - c).abs()).powf(exponent);
            total += *r;
        }
        for (u, r) in out.iter_mut().zip(&ratio) {
            u[px] = r / total;
        }
    }
}

/// `sum_x sum_k u_k(x)^m (f(x) - c_k)^2`.
pub fn objective(data: &[f64], centroids: &[f64], memberships: &[Vec<f64>], m: f64) -> f64 {
    memberships
        .iter()
        .zip(centroids)
        .map(|(u, &c)| {
            u.iter()
                .zip(data)
                .map(|(&uk, &x)| uk.powf(m) * (x - c) * (x - c))
                .sum::<f64>()
        })
        .sum()
}
