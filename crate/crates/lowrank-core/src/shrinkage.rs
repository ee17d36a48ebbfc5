//! Shrinkage operators: scalar soft thresholding and p-shrinkage, their
//! weighted elementwise matrix forms, and the singular-value versions
//! (singular-value thresholding and weighted Schatten-p shrinkage).
//!
//! The weighted forms implement one reweighting step: weights come from the
//! previous iterate's magnitudes as `1 / (|prev| + epsilon)`, so large
//! surviving entries are shrunk less on the next pass and entries that went
//! to zero stay there. Passing `None` for the previous iterate gives unit
//! weights, which is how the first solver iteration runs.

use crate::matrix::DenseMatrix;
use crate::{Error, Result};

/// Soft thresholding: shrinks `y` toward zero by `beta`, clamping at zero.
pub fn soft_threshold(y: f64, beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    y.signum() * (y.abs() - beta).max(0.0)
}

/// p-shrinkage with exponent `q` in (0, 1] and threshold `phi >= 0`:
/// `sgn(y) * max(0, |y| - phi * |y|^(q-1))`.
///
/// At `q = 1` this is exactly [`soft_threshold`]; for `q < 1` the penalty
/// term decays with `|y|`, so large magnitudes lose less than under soft
/// thresholding while small ones are zeroed more aggressively.
pub fn p_shrink(y: f64, phi: f64, q: f64) -> f64 {
    debug_assert!(phi >= 0.0);
    debug_assert!(q > 0.0 && q <= 1.0);
    if y == 0.0 {
        return 0.0;
    }
    let t = y.abs();
    y.signum() * (t - phi * t.powf(q - 1.0)).max(0.0)
}

/// Per-entry weights for one reweighting step, kept together with the
/// regularizing `epsilon` that bounds them.
#[derive(Clone, Debug)]
pub struct WeightVector {
    weights: Vec<f64>,
    epsilon: f64,
}

impl WeightVector {
    /// Unit weights; what the first iteration uses before any magnitudes
    /// are available.
    pub fn unit(len: usize, epsilon: f64) -> Result<Self> {
        Self::validate_epsilon(epsilon)?;
        Ok(Self {
            weights: vec![1.0; len],
            epsilon,
        })
    }

    /// Reweighting from previous magnitudes: `w_i = 1 / (|m_i| + epsilon)`.
    /// Weights are finite because `epsilon > 0` bounds them by `1/epsilon`.
    pub fn from_magnitudes(magnitudes: &[f64], epsilon: f64) -> Result<Self> {
        Self::validate_epsilon(epsilon)?;
        if let Some(bad) = magnitudes.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight source magnitude {bad} is not finite"
            )));
        }
        Ok(Self {
            weights: magnitudes.iter().map(|m| 1.0 / (m.abs() + epsilon)).collect(),
            epsilon,
        })
    }

    fn validate_epsilon(epsilon: f64) -> Result<()> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn validate_shrink_params(lambda: f64, mu: f64, power: f64, epsilon: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage lambda must be positive and finite, got {lambda}"
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage mu must be positive and finite, got {mu}"
        )));
    }
    if !(power.is_finite() && power > 0.0 && power <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage power must lie in (0, 1], got {power}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// Elementwise weighted p-shrinkage of `f` with thresholds
/// `lambda_e * w_ij / mu`, where the weights come from the previous sparse
/// iterate (`None` gives unit weights).
pub fn weighted_p_shrink(
    f: &DenseMatrix,
    prev_sparse: Option<&DenseMatrix>,
    lambda_e: f64,
    mu: f64,
    q: f64,
    epsilon: f64,
) -> Result<DenseMatrix> {
    validate_shrink_params(lambda_e, mu, q, epsilon)?;
    if let Some(prev) = prev_sparse {
        if prev.shape() != f.shape() {
            return Err(Error::ShapeMismatch {
                context: "previous sparse iterate",
                expected_rows: f.rows(),
                expected_cols: f.cols(),
                rows: prev.rows(),
                cols: prev.cols(),
            });
        }
    }
    let out = match prev_sparse {
        None => {
            let phi = lambda_e / mu;
            f.map(|y| p_shrink(y, phi, q))
        }
        Some(prev) => f.zip_map(prev, |y, e_prev| {
            let w = 1.0 / (e_prev.abs() + epsilon);
            p_shrink(y, lambda_e * w / mu, q)
        }),
    };
    Ok(out)
}

/// Singular-value thresholding: soft-thresholds the spectrum by `alpha` and
/// recomposes.
pub fn svt(y: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "svt threshold must be non-negative and finite, got {alpha}"
        )));
    }
    let factors = y.svd()?;
    let shrunk: Vec<f64> = factors
        .singular_values()
        .iter()
        .map(|&s| soft_threshold(s, alpha))
        .collect();
    Ok(factors.compose_with(&shrunk))
}

/// Weighted Schatten-p shrinkage: p-shrinks each singular value with
/// threshold `lambda_a * omega_i / mu` where `omega_i = 1 / (delta_i + eps)`
/// comes from the previous spectrum (`None` gives unit weights), then
/// recomposes. Returns the recomposed matrix and the new spectrum.
///
/// `prev_deltas` must be non-negative and non-ascending; the resulting
/// weights are then non-descending and shrinkage preserves the ordering of
/// the singular values. The explicit re-sort before recomposition is a
/// safety net for that invariant, not an expected code path.
pub fn weighted_schatten_p_shrink(
    y: &DenseMatrix,
    prev_deltas: Option<&[f64]>,
    lambda_a: f64,
    mu: f64,
    p: f64,
    epsilon: f64,
) -> Result<(DenseMatrix, Vec<f64>)> {
    validate_shrink_params(lambda_a, mu, p, epsilon)?;
    let rank = y.rows().min(y.cols());
    if let Some(prev) = prev_deltas {
        if prev.len() != rank {
            return Err(Error::InvalidArgument(format!(
                "previous spectrum has {} values, expected {rank}",
                prev.len()
            )));
        }
        if prev.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidArgument(
                "previous spectrum must be non-negative and finite".into(),
            ));
        }
        if prev.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "previous spectrum must be non-ascending".into(),
            ));
        }
    }

    let factors = y.svd()?;
    let mut deltas: Vec<f64> = factors
        .singular_values()
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let omega = match prev_deltas {
                None => 1.0,
                Some(prev) => 1.0 / (prev[i] + epsilon),
            };
            p_shrink(sigma, lambda_a * omega / mu, p)
        })
        .collect();
    deltas.sort_by(|a, b| b.partial_cmp(a).expect("shrunk spectrum is finite"));
    let composed = factors.compose_with(&deltas);
    Ok((composed, deltas))
}
