//! Python bindings for the matrix-recovery toolkit.
//!
//! Exposes the scalar shrinkage operators, the low-rank plus sparse solver
//! and the patch-grouping denoiser as one extension module. Matrices and
//! images cross the boundary as row-major nested lists of floats; errors
//! surface as the closest builtin Python exception (`ValueError` for
//! rejected input, `OSError` for i/o, `RuntimeError` for numerical
//! breakdown). Long-running solves release the interpreter lock.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lowrank_core::noise::NoiseSpec;
use lowrank_core::nss::{denoise_image, PipelineParams};
use lowrank_core::solver::{ialm_decompose, preset_config};
use lowrank_core::{
    metrics, noise, shrinkage, DenseMatrix, Error, ErrorClass, ImageBuffer, MethodPreset,
    SolverConfig,
};

fn to_py_err(err: Error) -> PyErr {
    let message = err.to_string();
    match err.class() {
        ErrorClass::Validation => PyValueError::new_err(message),
        ErrorClass::Io => PyOSError::new_err(message),
        ErrorClass::Numerical => PyRuntimeError::new_err(message),
    }
}

/// Flattens nested rows into one row-major buffer, rejecting ragged input.
fn flatten_rows(rows: &[Vec<f64>], what: &str) -> PyResult<(usize, usize, Vec<f64>)> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(height * width);
    for (index, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(PyValueError::new_err(format!(
                "{what} row {index} has {} values, the first row has {width}",
                row.len()
            )));
        }
        data.extend_from_slice(row);
    }
    Ok((height, width, data))
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DenseMatrix> {
    let (height, width, data) = flatten_rows(rows, "matrix")?;
    DenseMatrix::from_vec(height, width, data).map_err(to_py_err)
}

fn matrix_to_rows(matrix: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..matrix.rows()).map(|r| matrix.row(r).to_vec()).collect()
}

fn image_from_rows(rows: &[Vec<f64>], what: &str) -> PyResult<ImageBuffer> {
    let (height, width, data) = flatten_rows(rows, what)?;
    ImageBuffer::from_pixels(width, height, data).map_err(to_py_err)
}

fn image_to_rows(image: &ImageBuffer) -> Vec<Vec<f64>> {
    (0..image.height()).map(|r| image.row(r).to_vec()).collect()
}

/// Builds a solver configuration from a preset name plus field overrides.
#[allow(clippy::too_many_arguments)]
fn resolve_config(
    method: &str,
    noise_level: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    lambda_ratio: Option<f64>,
    lambda_e: Option<f64>,
    mu0: Option<f64>,
    rho: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> PyResult<SolverConfig> {
    let preset: MethodPreset = method.parse().map_err(to_py_err)?;
    let mut config = preset_config(preset, noise_level);
    if let Some(value) = p {
        config.p = value;
    }
    if let Some(value) = q {
        config.q = value;
    }
    if lambda_ratio.is_some() {
        config.lambda_ratio = lambda_ratio;
    }
    if lambda_e.is_some() {
        config.lambda_e = lambda_e;
    }
    if mu0.is_some() {
        config.mu0 = mu0;
    }
    if let Some(value) = rho {
        config.rho = value;
    }
    if let Some(value) = epsilon {
        config.epsilon = value;
    }
    if let Some(value) = max_iters {
        config.max_iters = value;
    }
    if let Some(value) = tol {
        config.tol = value;
    }
    config.validate().map_err(to_py_err)?;
    Ok(config)
}

/// Result of one low-rank plus sparse split.
#[pyclass(frozen, get_all)]
struct Decomposition {
    /// Low-rank part, as row-major nested lists.
    low_rank: Vec<Vec<f64>>,
    /// Sparse part, same shape as the input.
    sparse: Vec<Vec<f64>>,
    iterations_run: usize,
    /// Whether the relative residual reached the tolerance before the cap.
    converged: bool,
    /// Relative residual after each iteration.
    residuals: Vec<f64>,
}

#[pymethods]
impl Decomposition {
    fn __repr__(&self) -> String {
        let shape = format!(
            "{}x{}",
            self.low_rank.len(),
            self.low_rank.first().map_or(0, Vec::len)
        );
        format!(
            "Decomposition(shape={shape}, iterations_run={}, converged={})",
            self.iterations_run, self.converged
        )
    }
}

/// Soft thresholding: shrinks `y` toward zero by `beta`, clipping at zero.
#[pyfunction]
fn soft_threshold(y: f64, beta: f64) -> f64 {
    shrinkage::soft_threshold(y, beta)
}

/// Generalized shrinkage for the lq penalty; `q = 1` matches
/// `soft_threshold`.
#[pyfunction]
fn p_shrink(y: f64, phi: f64, q: f64) -> f64 {
    shrinkage::p_shrink(y, phi, q)
}

/// Names of the built-in solver presets, weakest regularization last.
#[pyfunction]
fn method_names() -> Vec<&'static str> {
    MethodPreset::ALL.iter().map(|preset| preset.name()).collect()
}

/// Singular values of `matrix`, largest first.
#[pyfunction]
fn singular_values(py: Python<'_>, matrix: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = matrix_from_rows(&matrix)?;
    let factors = py.detach(|| m.svd()).map_err(to_py_err)?;
    Ok(factors.singular_values().to_vec())
}

/// Peak signal-to-noise ratio between two images in dB (`inf` when equal).
#[pyfunction]
fn psnr(reference: Vec<Vec<f64>>, test: Vec<Vec<f64>>) -> PyResult<f64> {
    let a = image_from_rows(&reference, "reference image")?;
    let b = image_from_rows(&test, "test image")?;
    metrics::psnr(&a, &b).map_err(to_py_err)
}

/// Mean structural similarity between two images, in [-1, 1].
#[pyfunction]
fn ssim(reference: Vec<Vec<f64>>, test: Vec<Vec<f64>>) -> PyResult<f64> {
    let a = image_from_rows(&reference, "reference image")?;
    let b = image_from_rows(&test, "test image")?;
    metrics::ssim(&a, &b).map_err(to_py_err)
}

/// Corrupts a fraction `noise_level` of the pixels with salt-and-pepper
/// impulses, reproducibly for a given `seed`.
#[pyfunction]
#[pyo3(signature = (image, noise_level, seed, salt_fraction = 0.5))]
fn add_salt_pepper(
    image: Vec<Vec<f64>>,
    noise_level: f64,
    seed: u64,
    salt_fraction: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let clean = image_from_rows(&image, "image")?;
    let spec = NoiseSpec::new(noise_level, seed)
        .and_then(|s| s.with_salt_fraction(salt_fraction))
        .map_err(to_py_err)?;
    let noisy = noise::add_salt_pepper(&clean, &spec).map_err(to_py_err)?;
    Ok(image_to_rows(&noisy))
}

/// Splits `matrix` into a low-rank and a sparse part.
///
/// `method` picks a preset (see `method_names`); `noise_level` selects the
/// calibration row for the shrinkage exponents; the remaining keywords
/// override individual solver fields, subject to the preset's pins.
#[pyfunction]
#[pyo3(signature = (
    matrix, method = "dwlp", noise_level = None, p = None, q = None,
    lambda_ratio = None, lambda_e = None, mu0 = None, rho = None,
    epsilon = None, max_iters = None, tol = None,
))]
#[allow(clippy::too_many_arguments)]
fn decompose(
    py: Python<'_>,
    matrix: Vec<Vec<f64>>,
    method: &str,
    noise_level: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    lambda_ratio: Option<f64>,
    lambda_e: Option<f64>,
    mu0: Option<f64>,
    rho: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> PyResult<Decomposition> {
    let d = matrix_from_rows(&matrix)?;
    let config = resolve_config(
        method,
        noise_level,
        p,
        q,
        lambda_ratio,
        lambda_e,
        mu0,
        rho,
        epsilon,
        max_iters,
        tol,
    )?;
    let result = py
        .detach(|| ialm_decompose(&d, &config, None))
        .map_err(to_py_err)?;
    Ok(Decomposition {
        low_rank: matrix_to_rows(&result.low_rank),
        sparse: matrix_to_rows(&result.sparse),
        iterations_run: result.iterations_run,
        converged: result.converged,
        residuals: result.trace.iter().map(|record| record.residual).collect(),
    })
}

/// Removes impulse noise from a grayscale image by grouping similar
/// patches and replacing each group with its low-rank part.
///
/// `noise_level` is the assumed corruption fraction; it selects the
/// calibration row and the prefilter window. Pipeline keywords override the
/// defaults for that level, solver keywords override the preset.
#[pyfunction]
#[pyo3(signature = (
    image, method = "dwlp", noise_level = 0.3, patch_size = None,
    step = None, group_size = None, search_radius = None,
    median_window = None, aggregate = None, sequential = false,
    p = None, q = None, lambda_ratio = None, lambda_e = None, mu0 = None,
    rho = None, epsilon = None, max_iters = None, tol = None,
))]
#[allow(clippy::too_many_arguments)]
fn denoise(
    py: Python<'_>,
    image: Vec<Vec<f64>>,
    method: &str,
    noise_level: f64,
    patch_size: Option<usize>,
    step: Option<usize>,
    group_size: Option<usize>,
    search_radius: Option<usize>,
    median_window: Option<usize>,
    aggregate: Option<&str>,
    sequential: bool,
    p: Option<f64>,
    q: Option<f64>,
    lambda_ratio: Option<f64>,
    lambda_e: Option<f64>,
    mu0: Option<f64>,
    rho: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let noisy = image_from_rows(&image, "image")?;
    let config = resolve_config(
        method,
        Some(noise_level),
        p,
        q,
        lambda_ratio,
        lambda_e,
        mu0,
        rho,
        epsilon,
        max_iters,
        tol,
    )?;
    let mut params = PipelineParams::for_noise_level(noise_level);
    if let Some(value) = patch_size {
        params.patch_size = value;
    }
    if let Some(value) = step {
        params.step = value;
    }
    if let Some(value) = group_size {
        params.group_size = value;
    }
    if let Some(value) = search_radius {
        params.search_radius = value;
    }
    if let Some(value) = median_window {
        params.median_window = value;
    }
    if let Some(mode) = aggregate {
        params.aggregate_mode = mode.parse().map_err(to_py_err)?;
    }
    params.sequential = sequential;
    params.validate().map_err(to_py_err)?;
    let restored = py
        .detach(|| denoise_image(&noisy, &config, &params))
        .map_err(to_py_err)?;
    Ok(image_to_rows(&restored))
}

/// Low-rank recovery toolkit: shrinkage operators, an augmented-Lagrangian
/// low-rank plus sparse solver, and a patch-grouping image denoiser.
#[pymodule]
fn lowrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(p_shrink, m)?)?;
    m.add_function(wrap_pyfunction!(method_names, m)?)?;
    m.add_function(wrap_pyfunction!(singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(add_salt_pepper, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_class::<Decomposition>()?;
    Ok(())
}
