//! Deterministic synthetic test images: a two-region step, a tiled
//! two-tone texture, and a linear ramp, each with a companion inpainting
//! mask (and, for the step, an edge-completion line).
//!
//! The step geometry keeps the two exemplar strips disjoint and of
//! opposite intensity: the mask is a full-height central vertical band,
//! so the only fully-known patches are pure constants from one side or
//! the other.

use crate::error::{Error, Result};
use crate::raster::{ImageBuffer, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Step,
    TwoTone,
    Ramp,
}

impl std::str::FromStr for FixtureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(FixtureKind::Step),
            "two-tone" => Ok(FixtureKind::TwoTone),
            "ramp" => Ok(FixtureKind::Ramp),
            other => Err(Error::InvalidParameter(format!(
                "unknown fixture {other:?}; expected step, two-tone or ramp"
            ))),
        }
    }
}

pub fn synth_image(kind: FixtureKind, size: usize, channels: usize) -> Result<ImageBuffer> {
    if size < 16 {
        return Err(Error::InvalidParameter(format!(
            "fixture size must be at least 16, got {size}"
        )));
    }
    let img = match kind {
        FixtureKind::Step => ImageBuffer::from_fn(size, size, channels, |_, x, _| {
            if x < size / 2 {
                0.0
            } else {
                1.0
            }
        }),
        FixtureKind::TwoTone => {
            let tile = (size / 8).max(1);
            ImageBuffer::from_fn(size, size, channels, |_, x, y| {
                if (x / tile + y / tile) % 2 == 0 {
                    0.25
                } else {
                    0.75
                }
            })
        }
        FixtureKind::Ramp => {
            ImageBuffer::from_fn(size, size, channels, |_, x, _| x as f64 / (size - 1) as f64)
        }
    };
    Ok(img)
}

/// The standard companion mask. The step mask is a full-height central
/// vertical band (35%..65% of the width), which leaves exactly two
/// disjoint constant exemplar strips; the others use a centered square
/// covering a quarter of each dimension.
pub fn synth_mask(kind: FixtureKind, size: usize) -> Result<RegionMask> {
    if size < 16 {
        return Err(Error::InvalidParameter(format!(
            "fixture size must be at least 16, got {size}"
        )));
    }
    let mask = match kind {
        FixtureKind::Step => {
            let x0 = size * 35 / 100;
            let x1 = size * 65 / 100;
            RegionMask::from_fn(size, size, |x, _| x >= x0 && x < x1)
        }
        FixtureKind::TwoTone | FixtureKind::Ramp => {
            let a = size * 375 / 1000;
            let b = size * 625 / 1000;
            RegionMask::from_fn(size, size, |x, y| {
                x >= a && x < b && y >= a && y < b
            })
        }
    };
    Ok(mask)
}

/// Edge-completion stand-in: the line that continues the fixture's
/// dominant contour through the mask. Only the step fixture has one.
pub fn synth_edge(kind: FixtureKind, size: usize) -> Result<RegionMask> {
    match kind {
        FixtureKind::Step => Ok(RegionMask::from_fn(size, size, |x, _| x == size / 2)),
        _ => Err(Error::InvalidParameter(
            "only the step fixture has an edge completion".to_string(),
        )),
    }
}
