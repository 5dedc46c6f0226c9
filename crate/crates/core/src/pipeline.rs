//! End-to-end experiment: load, normalize, corrupt, initialize with fuzzy
//! c-means, solve, score and write artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcm::{fuzzy_cmeans, FcmConfig};
use crate::grid::{ImageGrid, LabelMask, NoiseSpec};
use crate::io;
use crate::metrics::{score_all, ScoreSummary};
use crate::solver::{PrimalResidual, Regularizer, Solver, SolverConfig, SolverOutcome};

pub const DEFAULT_NOISE_SEED: u64 = 20231;

pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const NOISY_FILE: &str = "noisy.pgm";
pub const LABELS_FILE: &str = "labels.pgm";
pub const MEMBERSHIP_STEM: &str = "membership";

fn default_phases() -> usize {
    2
}
fn default_lam() -> f64 {
    0.01
}
fn default_a() -> f64 {
    10.0
}
fn default_beta() -> f64 {
    SolverConfig::DEFAULT_BETA
}
fn default_max_iter() -> usize {
    SolverConfig::DEFAULT_MAX_ITER
}
fn default_tol() -> f64 {
    SolverConfig::DEFAULT_TOL
}
fn default_regularizer() -> Regularizer {
    Regularizer::Ttv
}
fn default_seed() -> u64 {
    DEFAULT_NOISE_SEED
}

/// Everything needed to reproduce one run. Doubles as the config-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_phases")]
    pub phases: usize,
    #[serde(default = "default_regularizer")]
    pub regularizer: Regularizer,
    #[serde(default = "default_lam")]
    pub lam: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_beta")]
    pub beta1: f64,
    #[serde(default = "default_beta")]
    pub beta2: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub noise_variance: f64,
    #[serde(default = "default_seed")]
    pub noise_seed: u64,
    #[serde(default)]
    pub include_background: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            ground_truth: None,
            output_dir: output_dir.into(),
            phases: default_phases(),
            regularizer: default_regularizer(),
            lam: default_lam(),
            a: default_a(),
            beta1: default_beta(),
            beta2: default_beta(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            noise_variance: 0.0,
            noise_seed: default_seed(),
            include_background: false,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            phases: self.phases,
            lam: self.lam,
            a: self.a,
            beta1: self.beta1,
            beta2: self.beta2,
            max_iter: self.max_iter,
            tol: self.tol,
            regularizer: self.regularizer,
        }
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(0.0, self.noise_variance, self.noise_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub final_rel_change: Option<f64>,
    pub energy: f64,
    pub centroids: Vec<f64>,
    pub fcm_iterations: usize,
    pub rel_change_history: Vec<f64>,
    pub residual_history: Vec<PrimalResidual>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Fuzzy c-means plus ADMM, in seconds.
    pub seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub config: RunConfig,
    pub scores: Option<ScoreSummary>,
    pub convergence: Convergence,
    pub timing: Timing,
}

impl SegmentationReport {
    pub fn mean_dice(&self) -> Option<f64> {
        self.scores.as_ref().map(|s| s.mean_dice)
    }
}

/// A prepared (normalized, corrupted) image and its optional ground truth.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub noisy: ImageGrid,
    pub truth: Option<LabelMask>,
}

/// Solver output together with the derived report pieces.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outcome: SolverOutcome,
    pub labels: LabelMask,
    pub scores: Option<ScoreSummary>,
    pub convergence: Convergence,
    pub timing: Timing,
}

impl Experiment {
    /// Normalizes `raw` to `[0, 1]` and adds noise.
    pub fn prepare(raw: &ImageGrid, truth: Option<LabelMask>, noise: &NoiseSpec) -> Result<Self> {
        if let Some(t) = &truth {
            if t.shape() != raw.shape() {
                return Err(Error::ShapeMismatch {
                    expected: raw.shape(),
                    found: t.shape(),
                });
            }
        }
        Ok(Self {
            noisy: raw.normalize().add_gaussian_noise(noise)?,
            truth,
        })
    }

    pub fn load(config: &RunConfig) -> Result<Self> {
        let raw = io::read_image(&config.input)?;
        let truth = config
            .ground_truth
            .as_deref()
            .map(|p| io::read_image(p).and_then(|g| io::labels_from_levels(&g, config.phases)))
            .transpose()?;
        Self::prepare(&raw, truth, &config.noise()?)
    }

    /// Fuzzy c-means initialization followed by the ADMM solve.
    pub fn evaluate(&self, config: &SolverConfig, include_background: bool) -> Result<Evaluation> {
        let start = Instant::now();
        let init = fuzzy_cmeans(&self.noisy, &FcmConfig::new(config.phases))?;
        let solver = Solver::new(self.noisy.clone(), *config)?;
        let outcome = solver.solve(init.membership, init.centroids)?;
        let seconds = start.elapsed().as_secs_f64();

        let labels = outcome.labels();
        let scores = self
            .truth
            .as_ref()
            .map(|t| score_all(&labels, t, config.phases, include_background))
            .transpose()?;
        let convergence = Convergence {
            iterations: outcome.iterations,
            final_rel_change: outcome.final_rel_change(),
            energy: outcome.energy,
            centroids: outcome.centroids.clone(),
            fcm_iterations: init.iterations,
            rel_change_history: outcome.rel_change_history.clone(),
            residual_history: outcome.residual_history.clone(),
        };
        let timing = Timing {
            seconds,
            solve_seconds: outcome.seconds,
        };
        Ok(Evaluation {
            outcome,
            labels,
            scores,
            convergence,
            timing,
        })
    }
}

fn write_artifacts(dir: &Path, exp: &Experiment, eval: &Evaluation, report: &SegmentationReport) -> Result<()> {
    io::write_unit_grid(&dir.join(NOISY_FILE), &exp.noisy)?;
    io::write_memberships(dir, MEMBERSHIP_STEM, &eval.outcome.membership)?;
    io::write_label_mask(&dir.join(LABELS_FILE), &eval.labels)?;
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// Runs the full pipeline and writes artifacts into `config.output_dir`.
/// Inputs are read and validated before the output directory is touched.
pub fn run(config: &RunConfig) -> Result<SegmentationReport> {
    config.solver_config().validate()?;
    let exp = Experiment::load(config)?;
    let eval = exp.evaluate(&config.solver_config(), config.include_background)?;
    let report = SegmentationReport {
        config: config.clone(),
        scores: eval.scores.clone(),
        convergence: eval.convergence.clone(),
        timing: eval.timing,
    };
    fs::create_dir_all(&config.output_dir)?;
    write_artifacts(&config.output_dir, &exp, &eval, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lam: f64,
    pub a: f64,
    pub mean_dice: f64,
    pub mean_jaccard: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub best: SegmentationReport,
    pub grid: Vec<SweepRow>,
}

/// Evaluates every `(lam, a)` pair on one noise realization and returns the
/// rows plus the index of the best mean DICE (first wins on ties).
pub fn sweep_experiment(
    exp: &Experiment,
    base: &SolverConfig,
    lam_grid: &[f64],
    a_grid: &[f64],
    include_background: bool,
) -> Result<(Vec<SweepRow>, usize, Evaluation)> {
    if lam_grid.is_empty() || a_grid.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    if exp.truth.is_none() {
        return Err(Error::InvalidInput("a sweep needs ground truth to rank runs".into()));
    }
    let a_values: Vec<f64> = match base.regularizer {
        Regularizer::Ttv => a_grid.to_vec(),
        Regularizer::Tv => vec![base.a],
    };
    let mut rows = Vec::new();
    let mut best: Option<(usize, Evaluation)> = None;
    for &a in &a_values {
        for &lam in lam_grid {
            let cfg = SolverConfig { lam, a, ..*base };
            let eval = exp.evaluate(&cfg, include_background)?;
            let scores = eval.scores.as_ref().expect("truth present");
            rows.push(SweepRow {
                lam,
                a,
                mean_dice: scores.mean_dice,
                mean_jaccard: scores.mean_jaccard,
                iterations: eval.outcome.iterations,
                seconds: eval.timing.seconds,
            });
            let better = match &best {
                None => true,
                Some((i, _)) => scores.mean_dice > rows[*i].mean_dice,
            };
            if better {
                best = Some((rows.len() - 1, eval));
            }
        }
    }
    let (idx, eval) = best.expect("grid is nonempty");
    Ok((rows, idx, eval))
}

/// Parameter sweep over `(lam, a)`; writes the best run's artifacts plus the
/// full grid table.
pub fn sweep(config: &RunConfig, lam_grid: &[f64], a_grid: &[f64]) -> Result<SweepReport> {
    config.solver_config().validate()?;
    let exp = Experiment::load(config)?;
    let (grid, idx, eval) = sweep_experiment(
        &exp,
        &config.solver_config(),
        lam_grid,
        a_grid,
        config.include_background,
    )?;
    let best = SegmentationReport {
        config: RunConfig {
            lam: grid[idx].lam,
            a: grid[idx].a,
            ..config.clone()
        },
        scores: eval.scores.clone(),
        convergence: eval.convergence.clone(),
        timing: eval.timing,
    };
    fs::create_dir_all(&config.output_dir)?;
    write_artifacts(&config.output_dir, &exp, &eval, &best)?;
    let report = SweepReport { best, grid };
    fs::write(
        config.output_dir.join(SWEEP_FILE),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(report)
}
