//! Error type shared across the inpainting pipeline.

use thiserror::Error;

/// Errors produced by the inpainting library.
#[derive(Debug, Error)]
pub enum Error {
    /// Two grids that must share dimensions do not.
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    /// A parameter violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration file or override could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// The extended inpainting region covers the whole image, leaving no
    /// fully-known patch to serve as an exemplar.
    #[error("no exemplars available: the inpainting region plus its dilations covers the image")]
    NoExemplars,

    /// The explicit identity-filter update found a pixel receiving no
    /// weight mass from any graph.
    #[error("uncovered pixel ({x},{y}): zero denominator in the explicit update")]
    UncoveredPixel { x: usize, y: usize },

    /// The linear solver did not reach the requested residual.
    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    /// The boundary-value problem is singular or under-determined.
    #[error("ill-posed configuration: {0}")]
    IllPosed(String),

    /// Multiscale schedule would shrink a level below the largest patch.
    #[error("pyramid too deep: level {level} is {w}x{h}, smaller than the largest patch ({patch_w}x{patch_h})")]
    PyramidTooDeep {
        level: usize,
        w: usize,
        h: usize,
        patch_w: usize,
        patch_h: usize,
    },

    /// The alternation produced an energy increase beyond solver slack,
    /// which violates the minimization structure.
    #[error("energy increased at iteration {iteration}: {previous:.6e} -> {current:.6e} (allowed slack {slack:.3e})")]
    EnergyIncrease {
        iteration: usize,
        previous: f64,
        current: f64,
        slack: f64,
    },

    /// Raster file decoding or encoding failed.
    #[error("image i/o error: {0}")]
    Image(#[from] image::ImageError),

    /// Underlying file-system error.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim_mismatch(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        }
    }
}
