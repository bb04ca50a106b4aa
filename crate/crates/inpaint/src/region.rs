//! Region algebra for the nested masks O ⊆ O* ⊆ Õ*.
//!
//! O is the inpainting region. O* extends it so that every pixel outside O*
//! has all its filter responses determined by known pixels, and Õ* extends
//! O* so that every pixel outside Õ* has its whole patch inside the
//! complement of O*. Both extensions are morphological dilations by
//! symmetric footprints.

use crate::error::{Error, Result};
use crate::raster::RegionMask;

/// Finite set of integer offsets centered at the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    offsets: Vec<(i32, i32)>,
}

impl Footprint {
    pub fn from_offsets(mut offsets: Vec<(i32, i32)>) -> Self {
        offsets.sort_unstable_by_key(|&(dx, dy)| (dy, dx));
        offsets.dedup();
        Footprint { offsets }
    }

    /// Centered rectangle with half extents (hw, hh): the patch shape.
    pub fn rect(half_w: i32, half_h: i32) -> Self {
        let mut offsets = Vec::with_capacity(((2 * half_w + 1) * (2 * half_h + 1)) as usize);
        for dy in -half_h..=half_h {
            for dx in -half_w..=half_w {
                offsets.push((dx, dy));
            }
        }
        Footprint { offsets }
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Pointwise union of several footprints.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a Footprint>) -> Self {
        let mut offsets: Vec<(i32, i32)> = Vec::new();
        for p in parts {
            offsets.extend_from_slice(&p.offsets);
        }
        Footprint::from_offsets(offsets)
    }

    /// Largest |dx| and |dy| over the offsets.
    pub fn half_extents(&self) -> (i32, i32) {
        let mut hw = 0;
        let mut hh = 0;
        for &(dx, dy) in &self.offsets {
            hw = hw.max(dx.abs());
            hh = hh.max(dy.abs());
        }
        (hw, hh)
    }
}

/// Morphological dilation of a mask by a footprint, clipped to the grid.
///
/// Returns { x : (x + footprint) ∩ mask ≠ ∅ }; for the symmetric footprints
/// used here this equals the usual dilation.
pub fn dilate(mask: &RegionMask, footprint: &Footprint) -> RegionMask {
    let (w, h) = mask.dims();
    let mut out = RegionMask::new(w, h, false);
    for (x, y) in mask.pixels() {
        for &(dx, dy) in footprint.offsets() {
            // x = p - offset covers every x with x + offset = p.
            let ox = x as i64 - dx as i64;
            let oy = y as i64 - dy as i64;
            if ox >= 0 && oy >= 0 && (ox as usize) < w && (oy as usize) < h {
                out.set(ox as usize, oy as usize, true);
            }
        }
    }
    out
}

/// O* from O: pixels whose shifted union-of-filter-supports meets O.
pub fn derive_filter_extended(
    inpaint: &RegionMask,
    supports: &[Footprint],
) -> Result<RegionMask> {
    let union = Footprint::union(supports);
    if union.is_empty() && !supports.is_empty() {
        return Err(Error::InvalidParameter(
            "filter supports are empty".to_string(),
        ));
    }
    Ok(dilate(inpaint, &union))
}

/// Õ* from O*: pixels whose shifted patch meets O*.
pub fn derive_patch_extended(
    filter_extended: &RegionMask,
    patch_footprint: &Footprint,
) -> Result<RegionMask> {
    Ok(dilate(filter_extended, patch_footprint))
}

/// The nested triple O ⊆ O* ⊆ Õ* together with the footprints that
/// produced it.
#[derive(Debug, Clone)]
pub struct RegionSet {
    pub inpaint: RegionMask,
    pub filter_extended: RegionMask,
    pub patch_extended: RegionMask,
}

impl RegionSet {
    /// Derive from the mask, the filter supports and the union patch shape.
    pub fn derive(
        inpaint: RegionMask,
        supports: &[Footprint],
        patch: &Footprint,
    ) -> Result<RegionSet> {
        let filter_extended = derive_filter_extended(&inpaint, supports)?;
        let patch_extended = derive_patch_extended(&filter_extended, patch)?;
        Ok(RegionSet {
            inpaint,
            filter_extended,
            patch_extended,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.inpaint.dims()
    }
}
