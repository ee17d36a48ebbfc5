//! Patch-grouping image denoiser: finds patches similar to each anchor,
//! stacks them into a matrix, strips the sparse corruption from every stack
//! with the solver and averages the recovered patches back into an image.
//!
//! The pipeline is deterministic end to end. Matching breaks distance ties
//! by scan order, groups are decomposed independently, and aggregation
//! walks anchors in grid order, so parallel and sequential runs of
//! [`denoise_image`] produce identical bytes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image::{ImageBuffer, ImageProvenance};
use crate::matrix::DenseMatrix;
use crate::metrics::psnr;
use crate::solver::{ialm_decompose, ialm_decompose_observed, SolverConfig};
use crate::{Error, Result};

/// Which recovered columns aggregation writes back into the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Only each group's first column, the reference patch at its anchor.
    ReferenceOnly,
    /// Every recovered column, averaged into the pixels it came from.
    FullGroup,
}

impl AggregateMode {
    pub fn label(&self) -> &'static str {
        match self {
            AggregateMode::ReferenceOnly => "reference",
            AggregateMode::FullGroup => "full",
        }
    }
}

impl std::str::FromStr for AggregateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reference" | "reference-only" => Ok(AggregateMode::ReferenceOnly),
            "full" | "full-group" => Ok(AggregateMode::FullGroup),
            _ => Err(Error::InvalidArgument(format!(
                "unknown aggregate mode '{s}' (expected reference or full)"
            ))),
        }
    }
}

/// Tunables for the denoising pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    /// Side length of the square patches.
    pub patch_size: usize,
    /// Anchor stride; a final row and column band keeps coverage when the
    /// image side is not a multiple of it.
    pub step: usize,
    /// Patches per group, the reference included.
    pub group_size: usize,
    /// Half-width of the square candidate window around each anchor.
    pub search_radius: usize,
    /// Median prefilter window side, odd and at least 3.
    pub median_window: usize,
    pub aggregate_mode: AggregateMode,
    /// Run the per-anchor loop on one thread. Output bytes do not depend
    /// on this; it only pins down scheduling.
    pub sequential: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            patch_size: 8,
            step: 4,
            group_size: 64,
            search_radius: 20,
            median_window: 3,
            aggregate_mode: AggregateMode::FullGroup,
            sequential: false,
        }
    }
}

impl PipelineParams {
    /// Defaults with the prefilter window widened to 5 for noise levels
    /// above 30%, where a 3x3 median no longer suppresses impulse clusters.
    pub fn for_noise_level(noise_level: f64) -> Self {
        Self {
            median_window: if noise_level > 0.30 { 5 } else { 3 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let at_least_one = |name: &str, v: usize| -> Result<()> {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
            Ok(())
        };
        at_least_one("patch size", self.patch_size)?;
        at_least_one("step", self.step)?;
        at_least_one("group size", self.group_size)?;
        at_least_one("search radius", self.search_radius)?;
        if self.median_window < 3 || self.median_window % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "median window must be odd and at least 3, got {}",
                self.median_window
            )));
        }
        Ok(())
    }
}

/// Patch anchor positions (top-left corners) covering an image completely.
///
/// Anchors advance by the step along each axis; when the final step would
/// overshoot, one extra anchor is pinned at the last position where the
/// patch still fits, so the union of all patches is the whole image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    width: usize,
    height: usize,
    patch_size: usize,
    anchors: Vec<(usize, usize)>,
}

fn axis_anchors(extent: usize, patch_size: usize, step: usize) -> Vec<usize> {
    let last = extent - patch_size;
    let mut out: Vec<usize> = (0..=last).step_by(step).collect();
    if *out.last().expect("position 0 always fits") != last {
        out.push(last);
    }
    out
}

impl PatchGrid {
    pub fn build(width: usize, height: usize, patch_size: usize, step: usize) -> Result<Self> {
        if patch_size == 0 || step == 0 {
            return Err(Error::InvalidConfig(
                "patch size and step must be at least 1".into(),
            ));
        }
        if patch_size > width || patch_size > height {
            return Err(Error::InvalidArgument(format!(
                "patch side {patch_size} does not fit a {width}x{height} image"
            )));
        }
        let row_anchors = axis_anchors(height, patch_size, step);
        let col_anchors = axis_anchors(width, patch_size, step);
        let mut anchors = Vec::with_capacity(row_anchors.len() * col_anchors.len());
        for &r in &row_anchors {
            for &c in &col_anchors {
                anchors.push((r, c));
            }
        }
        Ok(Self {
            width,
            height,
            patch_size,
            anchors,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Anchors in row-major scan order.
    pub fn anchors(&self) -> &[(usize, usize)] {
        &self.anchors
    }

    pub fn contains(&self, anchor: (usize, usize)) -> bool {
        self.anchors.binary_search(&anchor).is_ok()
    }
}

/// Replaces every pixel by the median of its square neighborhood, with
/// coordinates clamped at the borders (edge replication). A salt or pepper
/// impulse survives only where impulses fill most of the window, so this
/// gives matching a stable image to measure distances on.
pub fn median_prefilter(image: &ImageBuffer, window: usize) -> Result<ImageBuffer> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "median window must be odd and at least 3, got {window}"
        )));
    }
    let half = (window / 2) as isize;
    let (width, height) = (image.width(), image.height());
    let mut pixels = Vec::with_capacity(width * height);
    let mut neighborhood = Vec::with_capacity(window * window);
    for row in 0..height as isize {
        for col in 0..width as isize {
            neighborhood.clear();
            for dr in -half..=half {
                for dc in -half..=half {
                    neighborhood.push(image.at_clamped(row + dr, col + dc));
                }
            }
            let mid = neighborhood.len() / 2;
            let (_, median, _) = neighborhood.select_nth_unstable_by(mid, f64::total_cmp);
            pixels.push(*median);
        }
    }
    Ok(ImageBuffer::from_pixels(width, height, pixels)
        .expect("median of in-range pixels is in range")
        .with_provenance(ImageProvenance::Prefiltered))
}

/// Reads the square patch at `anchor` as a column-stacked vector: entry
/// `c * patch_size + r` is the pixel at `(anchor.0 + r, anchor.1 + c)`,
/// i.e. the patch is traversed column by column, top to bottom.
pub fn extract_patch(
    image: &ImageBuffer,
    anchor: (usize, usize),
    patch_size: usize,
) -> Result<Vec<f64>> {
    let (row, col) = anchor;
    if row + patch_size > image.height() || col + patch_size > image.width() {
        return Err(Error::InvalidArgument(format!(
            "patch of side {patch_size} at ({row}, {col}) leaves the {}x{} image",
            image.width(),
            image.height()
        )));
    }
    let mut out = Vec::with_capacity(patch_size * patch_size);
    for c in 0..patch_size {
        for r in 0..patch_size {
            out.push(image.at(row + r, col + c));
        }
    }
    Ok(out)
}

/// Squared Euclidean distance between the patches anchored at `a` and `b`.
fn patch_distance_sq(image: &ImageBuffer, a: (usize, usize), b: (usize, usize), patch_size: usize) -> f64 {
    let mut acc = 0.0;
    for r in 0..patch_size {
        let row_a = &image.row(a.0 + r)[a.1..a.1 + patch_size];
        let row_b = &image.row(b.0 + r)[b.1..b.1 + patch_size];
        for (&va, &vb) in row_a.iter().zip(row_b) {
            let d = va - vb;
            acc += d * d;
        }
    }
    acc
}

/// Selects the `group_size` patch positions most similar to the anchor's
/// patch, measured by Euclidean distance on `prefiltered`.
///
/// Candidates are every position, at stride 1, whose patch lies inside both
/// the image and the `(2 * radius + 1)`-sided window centered on the
/// anchor. The anchor itself is always first in the result; the rest are
/// ordered by distance, with ties broken by row-major candidate order. If
/// the window holds fewer than `group_size` candidates the call fails and
/// asks for a larger search radius.
pub fn match_similar(
    prefiltered: &ImageBuffer,
    anchor: (usize, usize),
    grid: &PatchGrid,
    group_size: usize,
    search_radius: usize,
) -> Result<Vec<(usize, usize)>> {
    if group_size == 0 || search_radius == 0 {
        return Err(Error::InvalidConfig(
            "group size and search radius must be at least 1".into(),
        ));
    }
    if prefiltered.width() != grid.width() || prefiltered.height() != grid.height() {
        return Err(Error::ShapeMismatch {
            context: "prefiltered image",
            expected_rows: grid.height(),
            expected_cols: grid.width(),
            rows: prefiltered.height(),
            cols: prefiltered.width(),
        });
    }
    if !grid.contains(anchor) {
        return Err(Error::InvalidArgument(format!(
            "({}, {}) is not an anchor of the patch grid",
            anchor.0, anchor.1
        )));
    }
    let patch_size = grid.patch_size();
    let row_lo = anchor.0.saturating_sub(search_radius);
    let row_hi = (anchor.0 + search_radius).min(grid.height() - patch_size);
    let col_lo = anchor.1.saturating_sub(search_radius);
    let col_hi = (anchor.1 + search_radius).min(grid.width() - patch_size);
    let available = (row_hi - row_lo + 1) * (col_hi - col_lo + 1);
    if available < group_size {
        return Err(Error::InvalidArgument(format!(
            "only {available} candidate patches lie within radius {search_radius} of \
             anchor ({}, {}), but the group needs {group_size}; increase the search radius",
            anchor.0, anchor.1
        )));
    }

    let mut others = Vec::with_capacity(available - 1);
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            if (row, col) == anchor {
                continue;
            }
            let d2 = patch_distance_sq(prefiltered, anchor, (row, col), patch_size);
            others.push((d2, row, col));
        }
    }
    others.sort_unstable_by(|a, b| {
        f64::total_cmp(&a.0, &b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut coords = Vec::with_capacity(group_size);
    coords.push(anchor);
    coords.extend(others.iter().take(group_size - 1).map(|&(_, r, c)| (r, c)));
    Ok(coords)
}

/// A stack of similar patches: column `j` of `data` is the column-stacked
/// patch at `member_coords[j]`, read from the image the group was built
/// from. Column 0 is the reference patch the group was matched around.
#[derive(Clone, Debug, PartialEq)]
pub struct NssGroup {
    pub data: DenseMatrix,
    pub member_coords: Vec<(usize, usize)>,
}

/// Stacks the patches at `coords` from `image` (normally the noisy one, so
/// the solver sees the actual corruption) into a `patch_size^2 x K` matrix.
pub fn build_nss_group(
    image: &ImageBuffer,
    coords: &[(usize, usize)],
    patch_size: usize,
) -> Result<NssGroup> {
    if coords.is_empty() {
        return Err(Error::InvalidArgument(
            "a patch group needs at least one member".into(),
        ));
    }
    let dim = patch_size * patch_size;
    let mut data = DenseMatrix::zeros(dim, coords.len());
    for (j, &coord) in coords.iter().enumerate() {
        let patch = extract_patch(image, coord, patch_size)?;
        for (i, value) in patch.into_iter().enumerate() {
            data[(i, j)] = value;
        }
    }
    Ok(NssGroup {
        data,
        member_coords: coords.to_vec(),
    })
}

fn check_group_shape(
    data: &DenseMatrix,
    coords: &[(usize, usize)],
    patch_size: usize,
    width: usize,
    height: usize,
) -> Result<()> {
    let dim = patch_size * patch_size;
    if data.rows() != dim || data.cols() != coords.len() {
        return Err(Error::ShapeMismatch {
            context: "recovered patch group",
            expected_rows: dim,
            expected_cols: coords.len(),
            rows: data.rows(),
            cols: data.cols(),
        });
    }
    if coords.is_empty() {
        return Err(Error::InvalidArgument(
            "a patch group needs at least one member".into(),
        ));
    }
    for &(row, col) in coords {
        if row + patch_size > height || col + patch_size > width {
            return Err(Error::InvalidArgument(format!(
                "patch of side {patch_size} at ({row}, {col}) leaves the {width}x{height} image"
            )));
        }
    }
    Ok(())
}

/// Adds the selected columns of `data` into the per-pixel sum buffer.
fn place_columns(
    sums: &mut [f64],
    data: &DenseMatrix,
    coords: &[(usize, usize)],
    patch_size: usize,
    width: usize,
    mode: AggregateMode,
) {
    let limit = match mode {
        AggregateMode::ReferenceOnly => 1,
        AggregateMode::FullGroup => coords.len(),
    };
    for (j, &(row, col)) in coords.iter().take(limit).enumerate() {
        for c in 0..patch_size {
            for r in 0..patch_size {
                sums[(row + r) * width + col + c] += data[(c * patch_size + r, j)];
            }
        }
    }
}

/// Counts how many selected columns touch each pixel, mirroring
/// [`place_columns`].
fn place_counts(
    counts: &mut [f64],
    coords: &[(usize, usize)],
    patch_size: usize,
    width: usize,
    mode: AggregateMode,
) {
    let limit = match mode {
        AggregateMode::ReferenceOnly => 1,
        AggregateMode::FullGroup => coords.len(),
    };
    for &(row, col) in coords.iter().take(limit) {
        for c in 0..patch_size {
            for r in 0..patch_size {
                counts[(row + r) * width + col + c] += 1.0;
            }
        }
    }
}

fn finish_aggregate(sums: &[f64], counts: &[f64], width: usize, height: usize) -> Result<ImageBuffer> {
    if let Some(pos) = counts.iter().position(|&c| c == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pixel ({}, {}) is covered by no recovered patch; the anchor grid must cover the image",
            pos / width,
            pos % width
        )));
    }
    let pixels = sums.iter().zip(counts).map(|(&s, &c)| s / c).collect();
    Ok(ImageBuffer::from_pixels_clamped(width, height, pixels)?
        .with_provenance(ImageProvenance::Restored))
}

/// Averages recovered patch stacks back into a `width x height` image.
///
/// Each entry pairs a recovered group matrix with the member coordinates
/// its columns came from. Every pixel becomes the mean of all recovered
/// values written onto it, clamped into [0, 255]; a pixel no selected
/// column touches is an error.
pub fn aggregate(
    groups: &[(DenseMatrix, Vec<(usize, usize)>)],
    width: usize,
    height: usize,
    patch_size: usize,
    mode: AggregateMode,
) -> Result<ImageBuffer> {
    let mut sums = vec![0.0f64; width * height];
    let mut counts = vec![0.0f64; width * height];
    for (data, coords) in groups {
        check_group_shape(data, coords, patch_size, width, height)?;
        place_columns(&mut sums, data, coords, patch_size, width, mode);
        place_counts(&mut counts, coords, patch_size, width, mode);
    }
    finish_aggregate(&sums, &counts, width, height)
}

/// Denoises an impulse-corrupted image.
///
/// The stages are: median prefilter (matching only), anchor grid, per
/// anchor a similarity search on the prefiltered image, a patch stack from
/// the noisy image and a low-rank plus sparse split of that stack, then
/// averaging of the low-rank parts. Per-anchor work runs on the rayon pool
/// unless `params.sequential` is set; results are combined in grid order
/// either way, so the output is identical bit for bit.
///
/// Errors from matching or the solver carry the anchor they occurred at.
pub fn denoise_image(
    noisy: &ImageBuffer,
    config: &SolverConfig,
    params: &PipelineParams,
) -> Result<ImageBuffer> {
    params.validate()?;
    config.validate()?;
    let prefiltered = median_prefilter(noisy, params.median_window)?;
    let grid = PatchGrid::build(noisy.width(), noisy.height(), params.patch_size, params.step)?;

    let solve_one = |&(row, col): &(usize, usize)| -> Result<(DenseMatrix, Vec<(usize, usize)>)> {
        let solve = || -> Result<_> {
            let coords = match_similar(
                &prefiltered,
                (row, col),
                &grid,
                params.group_size,
                params.search_radius,
            )?;
            let group = build_nss_group(noisy, &coords, params.patch_size)?;
            let result = ialm_decompose(&group.data, config, None)?;
            Ok((result.low_rank, coords))
        };
        solve().map_err(|e| e.at_anchor(row, col))
    };

    let recovered: Vec<(DenseMatrix, Vec<(usize, usize)>)> = if params.sequential {
        grid.anchors().iter().map(solve_one).collect::<Result<_>>()?
    } else {
        grid.anchors()
            .par_iter()
            .map(solve_one)
            .collect::<Result<_>>()?
    };
    aggregate(
        &recovered,
        noisy.width(),
        noisy.height(),
        params.patch_size,
        params.aggregate_mode,
    )
}

/// A traced denoise: the restored image plus the quality of the aggregate
/// after each solver iteration.
#[derive(Clone, Debug)]
pub struct DenoiseTrace {
    pub restored: ImageBuffer,
    /// PSNR against the reference of the image aggregated from every
    /// group's iterate at that index; length `config.max_iters`. Groups
    /// that stop early hold their final iterate for the remaining slots.
    pub psnr_per_iteration: Vec<f64>,
}

/// [`denoise_image`] instrumented with a per-iteration quality trace.
///
/// Runs sequentially and keeps one sum buffer per solver iteration
/// (`max_iters * width * height` doubles), so it costs more memory and
/// time than the plain path; its final image is bit-identical to
/// [`denoise_image`] under the same parameters.
pub fn denoise_image_traced(
    noisy: &ImageBuffer,
    reference: &ImageBuffer,
    config: &SolverConfig,
    params: &PipelineParams,
) -> Result<DenoiseTrace> {
    params.validate()?;
    config.validate()?;
    if reference.width() != noisy.width() || reference.height() != noisy.height() {
        return Err(Error::ShapeMismatch {
            context: "reference image",
            expected_rows: noisy.height(),
            expected_cols: noisy.width(),
            rows: reference.height(),
            cols: reference.width(),
        });
    }
    let prefiltered = median_prefilter(noisy, params.median_window)?;
    let grid = PatchGrid::build(noisy.width(), noisy.height(), params.patch_size, params.step)?;
    let (width, height) = (noisy.width(), noisy.height());
    let pixel_count = width * height;
    let mut sums = vec![vec![0.0f64; pixel_count]; config.max_iters];
    let mut counts = vec![0.0f64; pixel_count];

    for &(row, col) in grid.anchors() {
        let mut attempt = || -> Result<()> {
            let coords = match_similar(
                &prefiltered,
                (row, col),
                &grid,
                params.group_size,
                params.search_radius,
            )?;
            let group = build_nss_group(noisy, &coords, params.patch_size)?;
            let result = ialm_decompose_observed(&group.data, config, None, |view| {
                place_columns(
                    &mut sums[view.iteration - 1],
                    view.low_rank,
                    &coords,
                    params.patch_size,
                    width,
                    params.aggregate_mode,
                );
            })?;
            // A group that stops early is done refining; its final iterate
            // stands in for the iterations it never ran.
            for later in result.iterations_run..config.max_iters {
                place_columns(
                    &mut sums[later],
                    &result.low_rank,
                    &coords,
                    params.patch_size,
                    width,
                    params.aggregate_mode,
                );
            }
            place_counts(
                &mut counts,
                &coords,
                params.patch_size,
                width,
                params.aggregate_mode,
            );
            Ok(())
        };
        attempt().map_err(|e| e.at_anchor(row, col))?;
    }

    let mut psnr_per_iteration = Vec::with_capacity(config.max_iters);
    let mut restored = None;
    for iteration_sums in &sums {
        let image = finish_aggregate(iteration_sums, &counts, width, height)?;
        psnr_per_iteration.push(psnr(reference, &image)?);
        restored = Some(image);
    }
    Ok(DenoiseTrace {
        restored: restored.expect("max_iters is validated positive"),
        psnr_per_iteration,
    })
}
