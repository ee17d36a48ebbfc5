//! Deterministic repetitive test cards for the denoising pipeline.
//!
//! Three 256x256 grayscale cards built from pure functions of the pixel
//! coordinates, so two calls always produce identical buffers. All three
//! textures repeat within a patch-matching window, which makes stacked
//! similar-patch groups genuinely low-rank.

use std::f64::consts::TAU;

use crate::image::{ImageBuffer, ImageProvenance};

/// Side length of every generated card.
pub const CARD_SIDE: usize = 256;

fn card(f: impl Fn(usize, usize) -> f64) -> ImageBuffer {
    let mut pixels = Vec::with_capacity(CARD_SIDE * CARD_SIDE);
    for row in 0..CARD_SIDE {
        for col in 0..CARD_SIDE {
            pixels.push(f(row, col).clamp(10.0, 245.0));
        }
    }
    ImageBuffer::from_pixels(CARD_SIDE, CARD_SIDE, pixels)
        .expect("card generators stay inside [0, 255]")
        .with_provenance(ImageProvenance::Clean)
}

/// Running-bond brick wall: 32x16 bricks with dark mortar lines, brick
/// shades cycling deterministically along each course.
pub fn bricks() -> ImageBuffer {
    card(|row, col| {
        let course = row / 16;
        let shift = if course % 2 == 0 { 0 } else { 16 };
        let x = (col + shift) % 32;
        let y = row % 16;
        if y < 2 || x < 2 {
            45.0
        } else {
            let brick = (col + shift) / 32;
            let shade = ((course * 7 + brick * 13) % 5) as f64 * 18.0;
            let gradient = 25.0 * ((y as f64 - 8.0) / 8.0);
            140.0 + shade + gradient
        }
    })
}

/// Interfering sinusoids with periods 32 and 64 pixels, a smooth texture
/// that repeats along both axes.
pub fn waves() -> ImageBuffer {
    card(|row, col| {
        let x = col as f64;
        let y = row as f64;
        let phase = (TAU * x / 32.0 + 1.2 * (TAU * y / 64.0).sin()).sin();
        let swell = (TAU * y / 32.0).cos();
        128.0 + 68.0 * phase + 40.0 * swell
    })
}

/// Concentric rings with a 24-pixel radial period around the image center,
/// modulated by a slow horizontal sweep.
pub fn rings() -> ImageBuffer {
    card(|row, col| {
        let dx = col as f64 - 128.0;
        let dy = row as f64 - 128.0;
        let radius = (dx * dx + dy * dy).sqrt();
        128.0 + 95.0 * (TAU * radius / 24.0).cos() + 15.0 * (TAU * col as f64 / 128.0).sin()
    })
}

/// Every card paired with its name, in a fixed order.
pub fn corpus() -> Vec<(&'static str, ImageBuffer)> {
    vec![("bricks", bricks()), ("waves", waves()), ("rings", rings())]
}
