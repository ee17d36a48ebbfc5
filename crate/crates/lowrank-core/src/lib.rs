//! Low-rank plus sparse matrix recovery and a patch-grouping image denoiser.
//!
//! The crate has three layers:
//!
//! * dense matrices with a thin SVD ([`matrix`]) and the shrinkage operators
//!   built on them ([`shrinkage`]): soft thresholding, p-shrinkage and their
//!   weighted elementwise / singular-value forms;
//! * an inexact augmented-Lagrangian solver ([`solver`]) that splits a matrix
//!   into a low-rank and a sparse part, with presets ranging from the
//!   classical convex program to dual reweighted lp/lq shrinkage;
//! * an image pipeline ([`nss`]) that groups similar patches, decomposes each
//!   group with the solver and aggregates the low-rank parts back into a
//!   denoised image, plus impulse-noise synthesis and quality metrics
//!   ([`noise`], [`metrics`]) and PGM/CSV/JSON i/o ([`io`]).

pub mod error;
pub mod image;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod noise;
pub mod nss;
pub mod shrinkage;
pub mod solver;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use image::{ImageBuffer, ImageProvenance};
pub use matrix::{DenseMatrix, SvdFactors};
pub use solver::{DecompositionResult, MethodPreset, SolverConfig};
