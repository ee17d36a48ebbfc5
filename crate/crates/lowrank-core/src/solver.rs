//! Inexact augmented-Lagrangian solver for splitting a matrix `D` into a
//! low-rank part `A` and a sparse part `E`.
//!
//! Every iteration shrinks the sparse side elementwise, shrinks the spectrum
//! of the low-rank side, then updates the dual matrix `Z` and grows the
//! penalty `mu` geometrically. The presets differ only in which shrinkage
//! exponents are free and which sides carry adaptive weights:
//!
//! * `pcp`: convex program, soft thresholding on both sides, unit weights;
//! * `wnnm-rpca`: reweighted spectrum at exponent 1, plain sparse side;
//! * `wsnm-rpca`: reweighted spectrum at exponent `p < 1`, plain sparse side;
//! * `dwlp-11`: both sides reweighted, exponents fixed at 1;
//! * `dwlp`: both sides reweighted, both exponents free.

use std::fmt;
use std::str::FromStr;

use crate::matrix::DenseMatrix;
use crate::shrinkage::{weighted_p_shrink, weighted_schatten_p_shrink};
use crate::{Error, Result};

/// Which family of the splitting model to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodPreset {
    Pcp,
    WnnmRpca,
    WsnmRpca,
    Dwlp11,
    Dwlp,
}

impl MethodPreset {
    pub const ALL: [MethodPreset; 5] = [
        MethodPreset::Pcp,
        MethodPreset::WnnmRpca,
        MethodPreset::WsnmRpca,
        MethodPreset::Dwlp11,
        MethodPreset::Dwlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodPreset::Pcp => "pcp",
            MethodPreset::WnnmRpca => "wnnm-rpca",
            MethodPreset::WsnmRpca => "wsnm-rpca",
            MethodPreset::Dwlp11 => "dwlp-11",
            MethodPreset::Dwlp => "dwlp",
        }
    }

    /// Whether the sparse side reweights from the previous sparse iterate.
    pub fn reweights_sparse(&self) -> bool {
        matches!(self, MethodPreset::Dwlp11 | MethodPreset::Dwlp)
    }

    /// Whether the spectrum reweights from the previous shrunk spectrum.
    pub fn reweights_singular(&self) -> bool {
        !matches!(self, MethodPreset::Pcp)
    }
}

impl fmt::Display for MethodPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for MethodPreset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for MethodPreset {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let text = <String as serde::Deserialize>::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for MethodPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "pcp" => Ok(MethodPreset::Pcp),
            "wnnm-rpca" | "wnnm" => Ok(MethodPreset::WnnmRpca),
            "wsnm-rpca" | "wsnm" => Ok(MethodPreset::WsnmRpca),
            "dwlp-11" | "dwlp11" => Ok(MethodPreset::Dwlp11),
            "dwlp" => Ok(MethodPreset::Dwlp),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method '{s}' (expected pcp, wnnm-rpca, wsnm-rpca, dwlp-11 or dwlp)"
            ))),
        }
    }
}

/// Shrinkage exponents and regularizer ratio calibrated per corruption
/// level: (level, p, q, lambda_a / lambda_e).
const LEVEL_PARAMS: [(f64, f64, f64, f64); 5] = [
    (0.10, 0.650, 0.340, 6.358),
    (0.20, 0.765, 0.393, 7.738),
    (0.30, 0.800, 0.419, 10.003),
    (0.40, 0.905, 0.570, 10.792),
    (0.50, 0.916, 0.595, 13.866),
];

/// Row used when no corruption-level hint is given.
const DEFAULT_LEVEL_ROW: usize = 2;

fn level_row(hint: Option<f64>) -> (f64, f64, f64, f64) {
    match hint {
        None => LEVEL_PARAMS[DEFAULT_LEVEL_ROW],
        Some(h) => {
            let mut best = LEVEL_PARAMS[0];
            let mut best_gap = f64::INFINITY;
            for row in LEVEL_PARAMS {
                let gap = (row.0 - h).abs();
                if gap < best_gap {
                    best_gap = gap;
                    best = row;
                }
            }
            best
        }
    }
}

/// Full parameter set for one decomposition.
///
/// `lambda_e` and `mu0` default to data-dependent values resolved at solve
/// time (`1/sqrt(max(rows, cols))` and `1.25 / ||D||_2`), so they are
/// optional here. `lambda_ratio` is `lambda_a / lambda_e`; when absent the
/// low-rank weight is pinned at 1.0 absolute, which at the default
/// `lambda_e` makes `pcp` exactly the classical convex program.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub preset: MethodPreset,
    /// Spectrum shrinkage exponent, in (0, 1].
    pub p: f64,
    /// Sparse shrinkage exponent, in (0, 1].
    pub q: f64,
    pub lambda_ratio: Option<f64>,
    pub lambda_e: Option<f64>,
    pub mu0: Option<f64>,
    /// Penalty growth factor per iteration, > 1.
    pub rho: f64,
    /// Reweighting regularizer added to magnitudes before inversion.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once `||D - A - E||_F / ||D||_F` drops to this.
    pub tol: f64,
}

/// Default penalty growth per iteration.
const DEFAULT_RHO: f64 = 1.5;
/// Default reweighting regularizer.
const DEFAULT_EPSILON: f64 = 1e-6;
/// Default iteration cap; the schedule is tuned so iterates are stable well
/// before this.
const DEFAULT_MAX_ITERS: usize = 30;
/// Default relative-residual stopping tolerance.
const DEFAULT_TOL: f64 = 1e-7;

/// Builds the configuration for a preset, with exponents and regularizer
/// ratio taken from the calibration row nearest to `noise_level_hint`
/// (the 30% row when no hint is given).
pub fn preset_config(preset: MethodPreset, noise_level_hint: Option<f64>) -> SolverConfig {
    let (_, table_p, table_q, table_ratio) = level_row(noise_level_hint);
    let (p, q, ratio) = match preset {
        MethodPreset::Pcp => (1.0, 1.0, None),
        MethodPreset::WnnmRpca => (1.0, 1.0, Some(table_ratio)),
        MethodPreset::WsnmRpca => (table_p, 1.0, Some(table_ratio)),
        MethodPreset::Dwlp11 => (1.0, 1.0, Some(table_ratio)),
        MethodPreset::Dwlp => (table_p, table_q, Some(table_ratio)),
    };
    SolverConfig {
        preset,
        p,
        q,
        lambda_ratio: ratio,
        lambda_e: None,
        mu0: None,
        rho: DEFAULT_RHO,
        epsilon: DEFAULT_EPSILON,
        max_iters: DEFAULT_MAX_ITERS,
        tol: DEFAULT_TOL,
    }
}

impl SolverConfig {
    /// Effective sparse regularizer weight for a `rows x cols` problem.
    pub fn lambda_e_for(&self, rows: usize, cols: usize) -> f64 {
        self.lambda_e
            .unwrap_or_else(|| 1.0 / (rows.max(cols) as f64).sqrt())
    }

    /// Effective low-rank regularizer weight for a `rows x cols` problem.
    pub fn lambda_a_for(&self, rows: usize, cols: usize) -> f64 {
        match self.lambda_ratio {
            Some(ratio) => ratio * self.lambda_e_for(rows, cols),
            None => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
            Ok(())
        };
        let power = |name: &str, v: f64| -> Result<()> {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
            Ok(())
        };
        power("p", self.p)?;
        power("q", self.q)?;
        if let Some(r) = self.lambda_ratio {
            positive("lambda ratio", r)?;
        }
        if let Some(le) = self.lambda_e {
            positive("lambda_e", le)?;
        }
        if let Some(mu0) = self.mu0 {
            positive("mu0", mu0)?;
        }
        if !(self.rho.is_finite() && self.rho > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must be finite and greater than 1, got {}",
                self.rho
            )));
        }
        positive("epsilon", self.epsilon)?;
        positive("tol", self.tol)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }

        // Preset pins: fixed exponents may not be overridden.
        let pin = |name: &str, v: f64| -> Result<()> {
            if v != 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "preset {} fixes {name} = 1, got {v}",
                    self.preset
                )));
            }
            Ok(())
        };
        match self.preset {
            MethodPreset::Pcp | MethodPreset::WnnmRpca | MethodPreset::Dwlp11 => {
                pin("p", self.p)?;
                pin("q", self.q)?;
            }
            MethodPreset::WsnmRpca => pin("q", self.q)?,
            MethodPreset::Dwlp => {}
        }
        Ok(())
    }
}

/// One solver iteration as recorded in [`DecompositionResult::trace`].
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// `||D - A - E||_F / ||D||_F` after the iteration.
    pub residual: f64,
    /// Penalty value used during the iteration.
    pub mu: f64,
    /// PSNR of the low-rank iterate against the reference, when one was
    /// supplied.
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub low_rank: DenseMatrix,
    pub sparse: DenseMatrix,
    pub iterations_run: usize,
    /// Whether the residual reached the tolerance before the iteration cap.
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

/// Borrowed view of the iterates after one iteration, for observers that
/// accumulate per-iteration state without the solver having to clone it.
pub struct IterationView<'a> {
    /// 1-based iteration index.
    pub iteration: usize,
    pub low_rank: &'a DenseMatrix,
    pub sparse: &'a DenseMatrix,
    pub dual: &'a DenseMatrix,
    pub residual: f64,
    pub mu: f64,
}

/// `||D - A - E||_F / ||D||_F`, with the denominator floored to stay
/// defined for a zero input.
pub fn relative_residual(d: &DenseMatrix, a: &DenseMatrix, e: &DenseMatrix) -> f64 {
    let mut sum = 0.0f64;
    let mut peak = 0.0f64;
    for ((&dv, &av), &ev) in d.data().iter().zip(a.data()).zip(e.data()) {
        peak = peak.max((dv - av - ev).abs());
    }
    if peak > 0.0 {
        for ((&dv, &av), &ev) in d.data().iter().zip(a.data()).zip(e.data()) {
            let s = (dv - av - ev) / peak;
            sum += s * s;
        }
    }
    let num = peak * sum.sqrt();
    num / d.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// `D - X + Z / mu`, the shifted target both subproblems shrink toward.
fn shifted_target(d: &DenseMatrix, x: &DenseMatrix, z: &DenseMatrix, mu: f64) -> DenseMatrix {
    let data = d
        .data()
        .iter()
        .zip(x.data())
        .zip(z.data())
        .map(|((&dv, &xv), &zv)| dv - xv + zv / mu)
        .collect();
    DenseMatrix::from_parts(d.rows(), d.cols(), data)
}

fn check_shape(context: &'static str, d: &DenseMatrix, other: &DenseMatrix) -> Result<()> {
    if d.shape() != other.shape() {
        return Err(Error::ShapeMismatch {
            context,
            expected_rows: d.rows(),
            expected_cols: d.cols(),
            rows: other.rows(),
            cols: other.cols(),
        });
    }
    Ok(())
}

/// Sparse-side subproblem: shrinks `D - A + Z/mu` elementwise. The previous
/// sparse iterate feeds the weights only for presets that reweight the
/// sparse side; the first iteration passes `None` (unit weights).
pub fn solve_e_subproblem(
    d: &DenseMatrix,
    a: &DenseMatrix,
    z: &DenseMatrix,
    mu: f64,
    config: &SolverConfig,
    prev_sparse: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    check_shape("low-rank iterate", d, a)?;
    check_shape("dual matrix", d, z)?;
    let f = shifted_target(d, a, z, mu);
    let prev = if config.preset.reweights_sparse() {
        prev_sparse
    } else {
        None
    };
    weighted_p_shrink(
        &f,
        prev,
        config.lambda_e_for(d.rows(), d.cols()),
        mu,
        config.q,
        config.epsilon,
    )
}

/// Low-rank subproblem: shrinks the spectrum of `D - E + Z/mu`. The
/// previous shrunk spectrum feeds the weights only for presets that
/// reweight the spectrum; the first iteration passes `None` (unit weights).
pub fn solve_a_subproblem(
    d: &DenseMatrix,
    e: &DenseMatrix,
    z: &DenseMatrix,
    mu: f64,
    config: &SolverConfig,
    prev_deltas: Option<&[f64]>,
) -> Result<(DenseMatrix, Vec<f64>)> {
    check_shape("sparse iterate", d, e)?;
    check_shape("dual matrix", d, z)?;
    let y = shifted_target(d, e, z, mu);
    let prev = if config.preset.reweights_singular() {
        prev_deltas
    } else {
        None
    };
    weighted_schatten_p_shrink(
        &y,
        prev,
        config.lambda_a_for(d.rows(), d.cols()),
        mu,
        config.p,
        config.epsilon,
    )
}

/// Runs the full solve. When `reference` is given, every trace record also
/// carries the PSNR of the low-rank iterate against it.
///
/// Reweighting uses the previous iterate's magnitudes, except that an
/// identically zero previous iterate (the forced state right after
/// initialization) yields unit weights instead of `1/epsilon` ones.
pub fn ialm_decompose(
    d: &DenseMatrix,
    config: &SolverConfig,
    reference: Option<&DenseMatrix>,
) -> Result<DecompositionResult> {
    ialm_decompose_observed(d, config, reference, |_| {})
}

/// [`ialm_decompose`] with a per-iteration observer.
pub fn ialm_decompose_observed(
    d: &DenseMatrix,
    config: &SolverConfig,
    reference: Option<&DenseMatrix>,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<DecompositionResult> {
    config.validate()?;
    if let Some(r) = reference {
        check_shape("reference matrix", d, r)?;
    }
    let (rows, cols) = d.shape();
    let d_norm = d.frobenius_norm();

    if d_norm == 0.0 {
        // Nothing to split: both parts are zero and the residual already
        // vanishes after one recorded iteration.
        let zero = DenseMatrix::zeros(rows, cols);
        let mu = config.mu0.unwrap_or(1.0);
        let psnr = reference.map(|r| crate::metrics::psnr_data(r.data(), zero.data()));
        observer(&IterationView {
            iteration: 1,
            low_rank: &zero,
            sparse: &zero,
            dual: &zero,
            residual: 0.0,
            mu,
        });
        return Ok(DecompositionResult {
            low_rank: zero.clone(),
            sparse: zero,
            iterations_run: 1,
            converged: true,
            trace: vec![IterationRecord {
                residual: 0.0,
                mu,
                psnr,
            }],
        });
    }

    let mut mu = match config.mu0 {
        Some(v) => v,
        None => 1.25 / d.spectral_norm()?,
    };
    let mut a = d.clone();
    let mut e = DenseMatrix::zeros(rows, cols);
    let mut z = DenseMatrix::zeros(rows, cols);
    let mut prev_deltas: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iters {
        // An identically zero previous iterate carries no magnitude
        // information, so it reweights as unit rather than as 1/epsilon.
        // Starting from A = D forces the first sparse iterate to zero, and
        // 1/epsilon weights would freeze E for the rest of the run.
        let prev_sparse = e.data().iter().any(|&v| v != 0.0).then_some(&e);
        let new_e = solve_e_subproblem(d, &a, &z, mu, config, prev_sparse)?;
        let prev_spectrum = prev_deltas
            .as_deref()
            .filter(|ds| ds.iter().any(|&v| v != 0.0));
        let (new_a, deltas) = solve_a_subproblem(d, &new_e, &z, mu, config, prev_spectrum)?;
        a = new_a;
        e = new_e;

        // Fused residual norm plus dual update: Z += mu * (D - A - E).
        let mut residual_sq = 0.0f64;
        for (zv, ((&dv, &av), &ev)) in z
            .data_mut_internal()
            .iter_mut()
            .zip(d.data().iter().zip(a.data()).zip(e.data()))
        {
            let r = dv - av - ev;
            residual_sq += r * r;
            *zv += mu * r;
        }
        let residual = residual_sq.sqrt() / d_norm;

        if !(a.is_finite() && e.is_finite() && z.is_finite() && residual.is_finite()) {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite iterate at iteration {iteration}"
            )));
        }

        let psnr = reference.map(|r| crate::metrics::psnr_data(r.data(), a.data()));
        trace.push(IterationRecord { residual, mu, psnr });
        observer(&IterationView {
            iteration,
            low_rank: &a,
            sparse: &e,
            dual: &z,
            residual,
            mu,
        });

        prev_deltas = Some(deltas);
        mu *= config.rho;
        if residual <= config.tol {
            converged = true;
            break;
        }
    }

    Ok(DecompositionResult {
        low_rank: a,
        sparse: e,
        iterations_run: trace.len(),
        converged,
        trace,
    })
}
