//! Dense row-major matrices plus the few linear-algebra primitives the
//! shrinkage operators and solvers are built on: Frobenius and spectral
//! norms and a thin SVD with non-ascending singular values.

use crate::{Error, Result};

/// Dense row-major `f64` matrix. Construction validates that every entry is
/// finite and that the buffer length matches `rows * cols`; the numeric code
/// relies on both.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from a row-major buffer. Rejects empty shapes,
    /// length mismatches and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix shape {rows}x{cols} must have at least one row and column"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix buffer holds {} values, shape {rows}x{cols} needs {}",
                data.len(),
                rows * cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "matrix entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for values produced by our own numeric kernels.
    /// Shape errors are programming bugs here, so they are debug-asserted
    /// instead of reported.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows > 0 && cols > 0);
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix shape");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable buffer access for internal kernels. Callers are responsible
    /// for keeping the entries finite; the solver re-checks after each
    /// iteration.
    pub(crate) fn data_mut_internal(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Combines two same-shaped matrices entrywise.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_parts(self.rows, self.cols, data)
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Self::from_parts(self.cols, self.rows, data)
    }

    /// Plain dense product; shapes must agree.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self::from_parts(self.rows, other.cols, out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entrywise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm, computed with max-scaling so squares cannot overflow
    /// before the square root.
    pub fn frobenius_norm(&self) -> f64 {
        let peak = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        let sum: f64 = self
            .data
            .iter()
            .map(|&v| {
                let s = v / peak;
                s * s
            })
            .sum();
        peak * sum.sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        Ok(self.svd()?.singular_values().first().copied().unwrap_or(0.0))
    }

    /// Thin SVD: `U` is `m x r`, `V^T` is `r x n` with `r = min(m, n)`, and
    /// the singular values are non-negative and non-ascending.
    pub fn svd(&self) -> Result<SvdFactors> {
        let na = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        // Mirror the backend's own default tolerance: a tighter eps makes its
        // subproblem delimitation misclassify near-zero off-diagonal entries on
        // rank-deficient inputs and return inconsistent factors. `max_niter = 0`
        // iterates until convergence.
        let svd = na
            .try_svd(true, true, 5.0 * f64::EPSILON, 0)
            .ok_or(Error::SvdFailure {
                rows: self.rows,
                cols: self.cols,
            })?;
        let u = svd.u.expect("U requested");
        let v_t = svd.v_t.expect("V^T requested");
        let r = svd.singular_values.len();

        // Order does not depend on what the backend guarantees: sort the
        // triplets by descending singular value ourselves.
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .expect("singular values are finite")
        });

        let singular_values: Vec<f64> = order
            .iter()
            .map(|&i| svd.singular_values[i].max(0.0))
            .collect();
        let mut u_data = vec![0.0; self.rows * r];
        for row in 0..self.rows {
            for (j, &src) in order.iter().enumerate() {
                u_data[row * r + j] = u[(row, src)];
            }
        }
        let mut v_t_data = vec![0.0; r * self.cols];
        for (j, &src) in order.iter().enumerate() {
            for col in 0..self.cols {
                v_t_data[j * self.cols + col] = v_t[(src, col)];
            }
        }

        Ok(SvdFactors {
            u: DenseMatrix::from_parts(self.rows, r, u_data),
            singular_values,
            v_t: DenseMatrix::from_parts(r, self.cols, v_t_data),
        })
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Thin SVD of a matrix. Singular values are non-negative and sorted
/// non-ascending; `u` and `v_t` columns/rows are permuted to match.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    u: DenseMatrix,
    singular_values: Vec<f64>,
    v_t: DenseMatrix,
}

impl SvdFactors {
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn v_t(&self) -> &DenseMatrix {
        &self.v_t
    }

    /// `U * diag(values) * V^T` for an arbitrary replacement spectrum, used
    /// by the singular-value shrinkage operators.
    pub fn compose_with(&self, values: &[f64]) -> DenseMatrix {
        assert_eq!(values.len(), self.singular_values.len());
        let (m, r) = self.u.shape();
        let mut scaled = self.u.clone();
        for row in 0..m {
            for (j, &s) in values.iter().enumerate() {
                scaled[(row, j)] *= s;
            }
        }
        let _ = r;
        scaled.matmul(&self.v_t)
    }

    /// Recomposes the factored matrix.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.compose_with(&self.singular_values)
    }
}
