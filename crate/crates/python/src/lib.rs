//! Python bindings. Images cross the boundary as lists of rows.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ttvseg::grid::{ImageGrid, LabelMask, MembershipField, NoiseSpec};
use ttvseg::prox::{self, TL1Params};
use ttvseg::{metrics, phantom, FcmConfig, Regularizer, Solver, SolverConfig};

fn to_py(e: ttvseg::Error) -> PyErr {
    match e {
        ttvseg::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Converts a list of equal-length rows into a grid.
pub fn grid_from_rows(rows: Vec<Vec<f64>>) -> ttvseg::Result<ImageGrid> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(ttvseg::Error::InvalidInput("rows must all have the same length".into()));
    }
    ImageGrid::new(height, width, rows.concat())
}

pub fn grid_to_rows(g: &ImageGrid) -> Vec<Vec<f64>> {
    g.as_slice().chunks(g.width()).map(<[f64]>::to_vec).collect()
}

pub fn mask_from_rows(rows: Vec<Vec<usize>>, phases: usize) -> ttvseg::Result<LabelMask> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(ttvseg::Error::InvalidInput("rows must all have the same length".into()));
    }
    LabelMask::new(height, width, phases, rows.concat())
}

pub fn mask_to_rows(m: &LabelMask) -> Vec<Vec<usize>> {
    m.labels().chunks(m.width()).map(<[usize]>::to_vec).collect()
}

fn membership_to_rows(u: &MembershipField) -> Vec<Vec<Vec<f64>>> {
    u.grids().iter().map(grid_to_rows).collect()
}

fn label_count(rows: &[Vec<usize>]) -> usize {
    rows.iter().flatten().copied().max().map_or(1, |m| m + 1)
}

/// Rescales an image to [0, 1].
#[pyfunction]
fn normalize(image: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(grid_to_rows(&grid_from_rows(image).map_err(to_py)?.normalize()))
}

/// Adds seeded Gaussian noise.
#[pyfunction]
#[pyo3(signature = (image, variance, seed, mean = 0.0))]
fn add_noise(image: Vec<Vec<f64>>, variance: f64, seed: u64, mean: f64) -> PyResult<Vec<Vec<f64>>> {
    let spec = NoiseSpec::new(mean, variance, seed).map_err(to_py)?;
    let noisy = grid_from_rows(image)
        .and_then(|g| g.add_gaussian_noise(&spec))
        .map_err(to_py)?;
    Ok(grid_to_rows(&noisy))
}

#[pyfunction]
fn tl1_prox(t: f64, a: f64, lam: f64) -> PyResult<f64> {
    let params = TL1Params::new(a, lam).map_err(to_py)?;
    Ok(prox::tl1_prox_scalar(t, &params))
}

#[pyfunction]
fn tl1_threshold(a: f64, lam: f64) -> PyResult<f64> {
    let params = TL1Params::new(a, lam).map_err(to_py)?;
    Ok(prox::tl1_threshold(&params))
}

#[pyfunction]
fn project_simplex(y: Vec<f64>) -> PyResult<Vec<f64>> {
    prox::project_simplex(&y).map_err(to_py)
}

/// Returns `(memberships, centroids)` with centroids ascending.
#[pyfunction]
#[pyo3(signature = (image, clusters, seed = 0, restarts = 0))]
fn fuzzy_cmeans(
    image: Vec<Vec<f64>>,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<f64>)> {
    let f = grid_from_rows(image).map_err(to_py)?;
    let cfg = FcmConfig {
        seed,
        restarts,
        ..FcmConfig::new(clusters)
    };
    let r = ttvseg::fuzzy_cmeans(&f, &cfg).map_err(to_py)?;
    Ok((membership_to_rows(&r.membership), r.centroids))
}

#[pyclass(frozen, get_all)]
struct Segmentation {
    labels: Vec<Vec<usize>>,
    memberships: Vec<Vec<Vec<f64>>>,
    centroids: Vec<f64>,
    iterations: usize,
    energy: f64,
    rel_change_history: Vec<f64>,
}

#[pymethods]
impl Segmentation {
    fn __repr__(&self) -> String {
        format!(
            "Segmentation(phases={}, iterations={}, centroids={:?})",
            self.centroids.len(),
            self.iterations,
            self.centroids
        )
    }
}

/// Fuzzy c-means initialization followed by the ADMM solve. `image` should
/// already be normalized (and corrupted, if that is the experiment).
#[pyfunction]
#[pyo3(signature = (
    image, phases, lam = 0.01, a = 10.0, regularizer = "ttv",
    beta1 = SolverConfig::DEFAULT_BETA, beta2 = SolverConfig::DEFAULT_BETA,
    max_iter = SolverConfig::DEFAULT_MAX_ITER, tol = SolverConfig::DEFAULT_TOL
))]
#[allow(clippy::too_many_arguments)]
fn segment(
    image: Vec<Vec<f64>>,
    phases: usize,
    lam: f64,
    a: f64,
    regularizer: &str,
    beta1: f64,
    beta2: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Segmentation> {
    let regularizer: Regularizer = regularizer.parse().map_err(to_py)?;
    let config = SolverConfig {
        phases,
        lam,
        a,
        beta1,
        beta2,
        max_iter,
        tol,
        regularizer,
    };
    let f = grid_from_rows(image).map_err(to_py)?;
    let solver = Solver::new(f.clone(), config).map_err(to_py)?;
    let init = ttvseg::fuzzy_cmeans(&f, &FcmConfig::new(phases)).map_err(to_py)?;
    let out = solver.solve(init.membership, init.centroids).map_err(to_py)?;
    Ok(Segmentation {
        labels: mask_to_rows(&out.labels()),
        memberships: membership_to_rows(&out.membership),
        centroids: out.centroids,
        iterations: out.iterations,
        energy: out.energy,
        rel_change_history: out.rel_change_history,
    })
}

#[pyfunction]
fn dice(pred: Vec<Vec<usize>>, truth: Vec<Vec<usize>>, phase: usize) -> PyResult<f64> {
    let n = label_count(&pred).max(label_count(&truth)).max(phase + 1);
    let (p, t) = (mask_from_rows(pred, n).map_err(to_py)?, mask_from_rows(truth, n).map_err(to_py)?);
    metrics::dice(&p, &t, phase).map_err(to_py)
}

#[pyfunction]
fn jaccard(pred: Vec<Vec<usize>>, truth: Vec<Vec<usize>>, phase: usize) -> PyResult<f64> {
    let n = label_count(&pred).max(label_count(&truth)).max(phase + 1);
    let (p, t) = (mask_from_rows(pred, n).map_err(to_py)?, mask_from_rows(truth, n).map_err(to_py)?);
    metrics::jaccard(&p, &t, phase).map_err(to_py)
}

/// Returns `(mean_dice, mean_jaccard, [(phase, dice, jaccard), ...])`.
#[pyfunction]
#[pyo3(signature = (pred, truth, phases, include_background = false))]
fn score(
    pred: Vec<Vec<usize>>,
    truth: Vec<Vec<usize>>,
    phases: usize,
    include_background: bool,
) -> PyResult<(f64, f64, Vec<(usize, f64, f64)>)> {
    let p = mask_from_rows(pred, phases).map_err(to_py)?;
    let t = mask_from_rows(truth, phases).map_err(to_py)?;
    let s = metrics::score_all(&p, &t, phases, include_background).map_err(to_py)?;
    let regions = s.regions.iter().map(|r| (r.phase, r.dice, r.jaccard)).collect();
    Ok((s.mean_dice, s.mean_jaccard, regions))
}

/// Synthetic test images: `(raw intensities, ground-truth labels)`.
#[pyfunction]
#[pyo3(signature = (kind, height = None, width = None))]
fn make_phantom(
    kind: &str,
    height: Option<usize>,
    width: Option<usize>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<usize>>)> {
    let (img, mask) = match kind {
        "vessel" => phantom::vessel_tree(height.unwrap_or(128), width.unwrap_or(128)),
        "brain" => phantom::brain_slice(height.unwrap_or(104), width.unwrap_or(87)),
        "disk" => phantom::two_phase_disk(height.unwrap_or(64), width.unwrap_or(64)),
        other => return Err(PyValueError::new_err(format!("unknown phantom {other:?}"))),
    };
    Ok((grid_to_rows(&img), mask_to_rows(&mask)))
}

#[pymodule]
fn pyttvseg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Segmentation>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(tl1_prox, m)?)?;
    m.add_function(wrap_pyfunction!(tl1_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(fuzzy_cmeans, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(make_phantom, m)?)?;
    Ok(())
}
