//! Shared flag groups and their resolution into library configurations.
//! Flags always override preset values; contradictions (overriding a pinned
//! exponent, even median windows, ...) are rejected by the library
//! validators before any file is written.

use clap::Args;
use lowrank_core::nss::{AggregateMode, PipelineParams};
use lowrank_core::solver::{preset_config, MethodPreset, SolverConfig};
use lowrank_core::{Error, Result};

/// Numeric solver overrides layered on top of a method preset.
#[derive(Args, Clone, Debug)]
pub struct SolverOverrides {
    /// Spectrum shrinkage exponent in (0, 1].
    #[arg(long)]
    pub p: Option<f64>,
    /// Sparse shrinkage exponent in (0, 1].
    #[arg(long)]
    pub q: Option<f64>,
    /// Low-rank to sparse regularizer ratio (lambda_a / lambda_e).
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Sparse regularizer weight; defaults to 1/sqrt(max(rows, cols)).
    #[arg(long)]
    pub lambda_e: Option<f64>,
    /// Initial penalty; defaults to 1.25 over the spectral norm.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Penalty growth factor per iteration, > 1.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Reweighting regularizer.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Relative-residual stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

impl SolverOverrides {
    /// Builds the preset configuration for `method` at `noise_level` and
    /// applies every given override, then validates the result.
    pub fn resolve(&self, method: MethodPreset, noise_level: Option<f64>) -> Result<SolverConfig> {
        let mut config = preset_config(method, noise_level);
        if let Some(p) = self.p {
            config.p = p;
        }
        if let Some(q) = self.q {
            config.q = q;
        }
        if let Some(ratio) = self.ratio {
            config.lambda_ratio = Some(ratio);
        }
        if let Some(lambda_e) = self.lambda_e {
            config.lambda_e = Some(lambda_e);
        }
        if let Some(mu0) = self.mu0 {
            config.mu0 = Some(mu0);
        }
        if let Some(rho) = self.rho {
            config.rho = rho;
        }
        if let Some(eps) = self.eps {
            config.epsilon = eps;
        }
        if let Some(iters) = self.iters {
            config.max_iters = iters;
        }
        if let Some(tol) = self.tol {
            config.tol = tol;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Patch-pipeline overrides layered on top of the noise-level defaults.
#[derive(Args, Clone, Debug)]
pub struct PipelineArgs {
    /// Patch side length.
    #[arg(long)]
    pub patch: Option<usize>,
    /// Anchor stride.
    #[arg(long)]
    pub step: Option<usize>,
    /// Patches per group.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Candidate window half-width.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Median prefilter window side, odd.
    #[arg(long)]
    pub median_window: Option<usize>,
    /// Which recovered patches to average back: reference or full.
    #[arg(long)]
    pub aggregate: Option<AggregateMode>,
}

impl PipelineArgs {
    /// Builds pipeline parameters for `noise_level` (which picks the median
    /// window), applies overrides and the sequential flag, and validates.
    pub fn resolve(&self, noise_level: Option<f64>, sequential: bool) -> Result<PipelineParams> {
        let mut params = PipelineParams::for_noise_level(noise_level.unwrap_or(0.30));
        if let Some(patch) = self.patch {
            params.patch_size = patch;
        }
        if let Some(step) = self.step {
            params.step = step;
        }
        if let Some(k) = self.k {
            params.group_size = k;
        }
        if let Some(radius) = self.radius {
            params.search_radius = radius;
        }
        if let Some(window) = self.median_window {
            params.median_window = window;
        }
        if let Some(mode) = self.aggregate {
            params.aggregate_mode = mode;
        }
        params.sequential = sequential;
        params.validate()?;
        Ok(params)
    }
}

/// Axis of a parameter sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParameter {
    /// Group size.
    K,
    /// Spectrum exponent.
    P,
    /// Sparse exponent.
    Q,
    /// Regularizer ratio.
    Ratio,
    /// 2-D grid over both exponents.
    Pq,
}

/// Parses `row,col` into a patch anchor.
pub fn parse_anchor(text: &str) -> std::result::Result<(usize, usize), String> {
    let mut parts = text.split(',');
    let coordinate = |part: Option<&str>| {
        part.and_then(|t| t.trim().parse::<usize>().ok())
            .ok_or_else(|| format!("bad anchor '{text}', expected row,col"))
    };
    let row = coordinate(parts.next())?;
    let col = coordinate(parts.next())?;
    if parts.next().is_some() {
        return Err(format!("bad anchor '{text}', expected row,col"));
    }
    Ok((row, col))
}

/// Noise level validation shared by commands that corrupt images.
pub fn check_level(level: f64) -> Result<()> {
    if !(level.is_finite() && level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must lie in (0, 1], got {level}"
        )));
    }
    Ok(())
}
