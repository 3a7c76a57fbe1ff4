//! Near-field SAR image restoration by sparse spatial-variant deconvolution.
//!
//! * [`geometry`] computes resolutions and observation angles and
//!   synthesizes the rotated-sinc PSFs, memoized in a [`geometry::PsfBank`].
//! * [`simulate`] renders point-scatterer scenes into degraded images.
//! * [`solver`] restores scenes by cyclic coordinate descent on the lasso
//!   objective with spatial-variant atoms.
//! * [`baselines`] holds shift-invariant ISTA and spatial-variant CLEAN.
//! * [`metrics`] extracts and matches scatterers and builds the comparison
//!   table.
//! * [`formats`] and [`config`] handle files on disk.

pub mod baselines;
pub mod config;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{ImagingGeometry, PsfBank, PsfPatch, Quantization, Truncation};
pub use image::ComplexImage;
pub use simulate::{NoiseSpec, Scatterer, SceneSpec};
pub use solver::{RestorationResult, SolverConfig, VariantDictionary};
