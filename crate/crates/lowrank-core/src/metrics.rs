//! Image quality metrics: PSNR against a 255 peak and mean SSIM over
//! Gaussian-weighted windows.

use crate::image::ImageBuffer;
use crate::{Error, Result};

/// Fixed pixel peak; pixels are held in [0, 255] throughout.
pub const PEAK: f64 = 255.0;

/// SSIM window side length.
const SSIM_WINDOW: usize = 11;
/// Standard deviation of the SSIM window weights.
const SSIM_SIGMA: f64 = 1.5;
/// SSIM stabilizers: (K1 * peak)^2 and (K2 * peak)^2 with K1 = 0.01,
/// K2 = 0.03.
const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

/// PSNR between two equally long sample slices, `10 * log10(peak^2 / mse)`.
/// Identical inputs return positive infinity.
pub fn psnr_data(reference: &[f64], test: &[f64]) -> f64 {
    debug_assert_eq!(reference.len(), test.len());
    debug_assert!(!reference.is_empty());
    let mse: f64 = reference
        .iter()
        .zip(test)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

fn check_same_dims(reference: &ImageBuffer, test: &ImageBuffer) -> Result<()> {
    if reference.width() != test.width() || reference.height() != test.height() {
        return Err(Error::InvalidArgument(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    Ok(())
}

/// PSNR between two images of the same shape.
pub fn psnr(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    check_same_dims(reference, test)?;
    Ok(psnr_data(reference.pixels(), test.pixels()))
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for r in 0..SSIM_WINDOW {
        for c in 0..SSIM_WINDOW {
            let dr = r as f64 - center;
            let dc = c as f64 - center;
            let v = (-(dr * dr + dc * dc) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[r * SSIM_WINDOW + c] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean SSIM over all fully interior windows (no padding). Both images must
/// be at least as large as the window.
pub fn ssim(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    check_same_dims(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let kernel = gaussian_window();
    let mut total = 0.0;
    let mut windows = 0usize;
    for top in 0..=(h - SSIM_WINDOW) {
        for left in 0..=(w - SSIM_WINDOW) {
            let mut mean_x = 0.0;
            let mut mean_y = 0.0;
            let mut sq_x = 0.0;
            let mut sq_y = 0.0;
            let mut cross = 0.0;
            for r in 0..SSIM_WINDOW {
                let ref_row = &reference.row(top + r)[left..left + SSIM_WINDOW];
                let test_row = &test.row(top + r)[left..left + SSIM_WINDOW];
                let k_row = &kernel[r * SSIM_WINDOW..(r + 1) * SSIM_WINDOW];
                for c in 0..SSIM_WINDOW {
                    let k = k_row[c];
                    let x = ref_row[c];
                    let y = test_row[c];
                    mean_x += k * x;
                    mean_y += k * y;
                    sq_x += k * x * x;
                    sq_y += k * y * y;
                    cross += k * x * y;
                }
            }
            let var_x = sq_x - mean_x * mean_x;
            let var_y = sq_y - mean_y * mean_y;
            let cov = cross - mean_x * mean_y;
            let value = ((2.0 * mean_x * mean_y + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mean_x * mean_x + mean_y * mean_y + SSIM_C1) * (var_x + var_y + SSIM_C2));
            total += value;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}
