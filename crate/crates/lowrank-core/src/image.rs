//! Grayscale image buffer: row-major `f64` pixels held in [0, 255].
//!
//! Pixels stay doubles end to end; quantization to bytes happens only when
//! a PGM file is written.

use crate::{Error, Result};

/// Where an image came from, for report labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageProvenance {
    Clean,
    Noisy,
    Prefiltered,
    Restored,
}

impl ImageProvenance {
    pub fn label(&self) -> &'static str {
        match self {
            ImageProvenance::Clean => "clean",
            ImageProvenance::Noisy => "noisy",
            ImageProvenance::Prefiltered => "prefiltered",
            ImageProvenance::Restored => "restored",
        }
    }
}

/// Row-major grayscale image. Every pixel is finite and in [0, 255];
/// construction enforces it.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    provenance: ImageProvenance,
}

impl ImageBuffer {
    /// Builds an image from row-major pixels, rejecting out-of-range or
    /// non-finite values.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image shape {width}x{height} must have at least one row and column"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "image buffer holds {} pixels, shape {width}x{height} needs {}",
                pixels.len(),
                width * height
            )));
        }
        if let Some(pos) = pixels
            .iter()
            .position(|p| !p.is_finite() || *p < 0.0 || *p > 255.0)
        {
            return Err(Error::InvalidArgument(format!(
                "pixel at row {}, column {} is outside [0, 255]: {}",
                pos / width,
                pos % width,
                pixels[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            provenance: ImageProvenance::Clean,
        })
    }

    /// Like [`from_pixels`](Self::from_pixels) but clamps values into
    /// [0, 255] first; non-finite values are still rejected. Used where
    /// averaging recovered patches can drift slightly out of range.
    pub fn from_pixels_clamped(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::NumericalBreakdown(
                "non-finite pixel produced during reconstruction".into(),
            ));
        }
        Self::from_pixels(
            width,
            height,
            pixels.into_iter().map(|p| p.clamp(0.0, 255.0)).collect(),
        )
    }

    /// Uniform gray image, handy for tests and padding.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_pixels(width, height, vec![value; width * height])
    }

    pub fn with_provenance(mut self, provenance: ImageProvenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn provenance(&self) -> ImageProvenance {
        self.provenance
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Pixel at `(row, col)`.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    /// Pixel at `(row, col)` with coordinates clamped to the image, the
    /// edge-replication rule the median prefilter uses.
    pub fn at_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.pixels[r * self.width + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates_range() {
        assert!(ImageBuffer::from_pixels(2, 2, vec![0.0, 255.0, 12.5, 80.0]).is_ok());
        assert!(ImageBuffer::from_pixels(2, 2, vec![0.0, 256.0, 1.0, 1.0]).is_err());
        assert!(ImageBuffer::from_pixels(2, 2, vec![-0.5, 0.0, 1.0, 1.0]).is_err());
        assert!(ImageBuffer::from_pixels(2, 2, vec![f64::NAN, 0.0, 1.0, 1.0]).is_err());
        assert!(ImageBuffer::from_pixels(0, 2, vec![]).is_err());
        assert!(ImageBuffer::from_pixels(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn clamped_construction() {
        let img = ImageBuffer::from_pixels_clamped(2, 1, vec![-3.0, 260.0]).unwrap();
        assert_eq!(img.pixels(), &[0.0, 255.0]);
        assert!(ImageBuffer::from_pixels_clamped(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn indexing_and_edge_replication() {
        let img = ImageBuffer::from_pixels(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(img.at(0, 0), 1.0);
        assert_eq!(img.at(1, 2), 6.0);
        assert_eq!(img.at_clamped(-5, 0), 1.0);
        assert_eq!(img.at_clamped(0, 99), 3.0);
        assert_eq!(img.at_clamped(99, -1), 4.0);
        assert_eq!(img.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn provenance_tagging() {
        let img = ImageBuffer::filled(2, 2, 10.0).unwrap();
        assert_eq!(img.provenance(), ImageProvenance::Clean);
        let img = img.with_provenance(ImageProvenance::Noisy);
        assert_eq!(img.provenance(), ImageProvenance::Noisy);
        assert_eq!(img.provenance().label(), "noisy");
    }
}
