//! Nonlocal feature-driven exemplar inpainting.
//!
//! The model measures patch similarity in user-selected convolution-filter
//! feature domains and alternates two half-steps until the unknown region
//! settles: a weight update that computes, per feature graph, the
//! nearest-neighbor field from the extended unknown region into the
//! fully-known remainder, and an image update that solves the resulting
//! linear Euler-Lagrange boundary-value problem (or its analytic
//! identity-filter special case). Anisotropic per-pixel dominance fields,
//! graph partition masks and multiscale initialization steer the process.

pub mod config;
pub mod error;
pub mod filters;
pub mod fixtures;
pub mod metric;
pub mod nnf;
pub mod pipeline;
pub mod raster;
pub mod region;
pub mod solver;

pub use error::{Error, Result};
pub use raster::{downscale, psnr, upscale, ImageBuffer, RegionMask};
pub use region::{derive_filter_extended, derive_patch_extended, Footprint, RegionSet};
