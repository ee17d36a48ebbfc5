//! Salt-and-pepper (impulse) noise synthesis.
//!
//! Each pixel is corrupted independently with the configured probability,
//! using a single uniform draw per pixel in row-major order: draws below
//! `probability * salt_fraction` become salt, the rest of the corrupted
//! range becomes pepper. The generator is ChaCha8 seeded from a `u64`, and
//! uniforms are built from the top 53 bits of each 64-bit output, so the
//! stream is reproducible across platforms and does not depend on any
//! distribution library internals.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{ImageBuffer, ImageProvenance};
use crate::{Error, Result};

/// Impulse-noise parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Per-pixel corruption probability, in (0, 1].
    pub probability: f64,
    pub seed: u64,
    /// Share of corrupted pixels that become salt; the rest become pepper.
    pub salt_fraction: f64,
    pub salt_value: f64,
    pub pepper_value: f64,
}

impl NoiseSpec {
    /// Standard 50/50 split with full-scale impulses.
    pub fn new(probability: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            probability,
            seed,
            salt_fraction: 0.5,
            salt_value: 255.0,
            pepper_value: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_salt_fraction(mut self, salt_fraction: f64) -> Result<Self> {
        self.salt_fraction = salt_fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.probability.is_finite() && self.probability > 0.0 && self.probability <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "noise probability must lie in (0, 1], got {}",
                self.probability
            )));
        }
        if !(self.salt_fraction.is_finite() && (0.0..=1.0).contains(&self.salt_fraction)) {
            return Err(Error::InvalidArgument(format!(
                "salt fraction must lie in [0, 1], got {}",
                self.salt_fraction
            )));
        }
        for (name, v) in [("salt value", self.salt_value), ("pepper value", self.pepper_value)] {
            if !(v.is_finite() && (0.0..=255.0).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 255], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform in [0, 1) from the top 53 bits of one generator word.
#[inline]
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Corrupts the image per `spec`. One uniform draw per pixel in row-major
/// order, so the corruption pattern for a given seed is independent of how
/// the result is used afterwards.
pub fn add_salt_pepper(image: &ImageBuffer, spec: &NoiseSpec) -> Result<ImageBuffer> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let salt_below = spec.probability * spec.salt_fraction;
    let pixels = image
        .pixels()
        .iter()
        .map(|&p| {
            let u = unit_uniform(&mut rng);
            if u < salt_below {
                spec.salt_value
            } else if u < spec.probability {
                spec.pepper_value
            } else {
                p
            }
        })
        .collect();
    Ok(ImageBuffer::from_pixels(image.width(), image.height(), pixels)?
        .with_provenance(ImageProvenance::Noisy))
}
