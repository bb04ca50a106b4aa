//! Convolution kernels, adjoints, stencil composition and convolution with
//! explicit boundary handling.
//!
//! Convolution uses the mathematical orientation
//!
//! ```text
//! out(x) = sum_h k(h) * img(x - h)
//! ```
//!
//! not correlation. This matters: the adjoint kernel is the reflection
//! `k̄(t) = k(-t)`, and the adjoint pairing `<k*a, b> = <a, k̄*b>` used by
//! the Euler-Lagrange derivation is orientation-sensitive. Many image
//! libraries implement correlation instead; kernels loaded from files are
//! interpreted in the convention above.

use crate::error::{Error, Result};
use crate::raster::ImageBuffer;
use crate::region::Footprint;

/// How out-of-range reads are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Clamp to the nearest edge pixel (default).
    #[default]
    Replicate,
    /// Mirror about the edge without repeating it.
    Reflect,
    /// Treat everything outside the grid as zero.
    Zero,
}

impl BoundaryPolicy {
    /// Resolve a possibly out-of-range index; `None` means the read is zero.
    #[inline]
    pub fn resolve(self, i: i64, n: usize) -> Option<usize> {
        if i >= 0 && (i as usize) < n {
            return Some(i as usize);
        }
        match self {
            BoundaryPolicy::Replicate => Some(i.clamp(0, n as i64 - 1) as usize),
            BoundaryPolicy::Reflect => {
                if n == 1 {
                    return Some(0);
                }
                let p = 2 * (n as i64 - 1);
                let m = ((i % p) + p) % p;
                Some(if m < n as i64 { m as usize } else { (p - m) as usize })
            }
            BoundaryPolicy::Zero => None,
        }
    }
}

/// Odd-sized 2D stencil with its anchor at the center.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    half_w: i32,
    half_h: i32,
    coeffs: Vec<f64>,
    nonzero: Vec<(i32, i32, f64)>,
    label: String,
}

impl Kernel {
    /// Build from coefficients laid out row-major over the centered box
    /// (2*half_w+1) x (2*half_h+1); offsets run left-to-right, top-to-bottom.
    pub fn new(half_w: i32, half_h: i32, coeffs: Vec<f64>, label: impl Into<String>) -> Self {
        let w = (2 * half_w + 1) as usize;
        let h = (2 * half_h + 1) as usize;
        assert_eq!(coeffs.len(), w * h, "coefficient count must match the box");
        let mut nonzero = Vec::new();
        for dy in -half_h..=half_h {
            for dx in -half_w..=half_w {
                let c = coeffs[((dy + half_h) as usize) * w + (dx + half_w) as usize];
                if c != 0.0 {
                    nonzero.push((dx, dy, c));
                }
            }
        }
        Kernel {
            half_w,
            half_h,
            coeffs,
            nonzero,
            label: label.into(),
        }
    }

    /// Build from explicit rows; dimensions must be odd.
    pub fn from_rows(rows: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let h = rows.len();
        if h == 0 || h % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel height must be odd and positive, got {h}"
            )));
        }
        let w = rows[0].len();
        if w == 0 || w % 2 == 0 || rows.iter().any(|r| r.len() != w) {
            return Err(Error::InvalidParameter(
                "kernel rows must be non-empty, equal-length and odd-sized".to_string(),
            ));
        }
        let coeffs = rows.iter().flatten().copied().collect();
        Ok(Kernel::new(
            (w as i32 - 1) / 2,
            (h as i32 - 1) / 2,
            coeffs,
            label,
        ))
    }

    /// Parse a plain-text matrix: whitespace-separated values, one row per line.
    pub fn parse_text(text: &str, label: impl Into<String>) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| {
                Error::Config(format!("bad kernel coefficient in line {line:?}: {e}"))
            })?);
        }
        Kernel::from_rows(&rows, label)
    }

    pub fn half_width(&self) -> i32 {
        self.half_w
    }

    pub fn half_height(&self) -> i32 {
        self.half_h
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn coeff(&self, dx: i32, dy: i32) -> f64 {
        if dx.abs() > self.half_w || dy.abs() > self.half_h {
            return 0.0;
        }
        let w = (2 * self.half_w + 1) as usize;
        self.coeffs[((dy + self.half_h) as usize) * w + (dx + self.half_w) as usize]
    }

    /// Nonzero coefficients as (dx, dy, value), row-major over the box.
    pub fn nonzero(&self) -> &[(i32, i32, f64)] {
        &self.nonzero
    }

    /// The symmetric footprint used for region derivation: the centered odd
    /// bounding box of the stencil.
    pub fn support(&self) -> Footprint {
        Footprint::rect(self.half_w, self.half_h)
    }

    /// Kernel of the adjoint convolution operator: coefficients reflected
    /// through the origin, `k̄(t) = k(-t)`.
    pub fn adjoint(&self) -> Kernel {
        let w = (2 * self.half_w + 1) as usize;
        let h = (2 * self.half_h + 1) as usize;
        let mut coeffs = vec![0.0; w * h];
        for dy in -self.half_h..=self.half_h {
            for dx in -self.half_w..=self.half_w {
                coeffs[((dy + self.half_h) as usize) * w + (dx + self.half_w) as usize] =
                    self.coeff(-dx, -dy);
            }
        }
        Kernel::new(
            self.half_w,
            self.half_h,
            coeffs,
            format!("adj({})", self.label),
        )
    }

    /// Discrete convolution of two stencils; support sizes add.
    pub fn compose(&self, other: &Kernel) -> Kernel {
        let hw = self.half_w + other.half_w;
        let hh = self.half_h + other.half_h;
        let w = (2 * hw + 1) as usize;
        let mut coeffs = vec![0.0; w * (2 * hh + 1) as usize];
        for &(ax, ay, ac) in &self.nonzero {
            for &(bx, by, bc) in &other.nonzero {
                let dx = ax + bx;
                let dy = ay + by;
                coeffs[((dy + hh) as usize) * w + (dx + hw) as usize] += ac * bc;
            }
        }
        Kernel::new(hw, hh, coeffs, format!("{}*{}", self.label, other.label))
    }

    pub fn scaled(&self, factor: f64) -> Kernel {
        let coeffs = self.coeffs.iter().map(|c| c * factor).collect();
        Kernel::new(self.half_w, self.half_h, coeffs, self.label.clone())
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// Identity stencil g1 = [1].
pub fn identity() -> Kernel {
    Kernel::new(0, 0, vec![1.0], "identity")
}

/// Horizontal forward-difference stencil, the row [0, -1, 1].
pub fn grad_x() -> Kernel {
    Kernel::new(1, 0, vec![0.0, -1.0, 1.0], "grad_x")
}

/// Vertical forward-difference stencil, the column [0, -1, 1]^T.
pub fn grad_y() -> Kernel {
    Kernel::new(0, 1, vec![0.0, -1.0, 1.0], "grad_y")
}

/// Five-point Laplacian stencil.
pub fn laplacian() -> Kernel {
    Kernel::new(
        1,
        1,
        vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
        "laplacian",
    )
}

/// Weight profiles for the nonlocal gamma kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    /// gamma(h) = exp(-|h|^2 / sigma^2)
    Gauss { sigma: f64 },
    /// gamma(h) = C * |h|^(-1-s), with C chosen so that the squared
    /// weights sum to one over the footprint.
    Fractional { s: f64 },
    /// gamma(h) = 1 on every nonzero offset.
    Uniform,
}

/// Per-offset gamma weights over the nonzero offsets of the footprint,
/// in row-major offset order.
pub fn gamma_weights(
    footprint: &Footprint,
    spec: &GammaSpec,
) -> Result<Vec<((i32, i32), f64)>> {
    let offsets: Vec<(i32, i32)> = footprint
        .offsets()
        .iter()
        .copied()
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .collect();
    if offsets.is_empty() {
        return Err(Error::InvalidParameter(
            "gamma footprint has no nonzero offsets".to_string(),
        ));
    }
    let mut weights: Vec<((i32, i32), f64)> = match spec {
        GammaSpec::Gauss { sigma } => {
            if *sigma <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "gamma gauss sigma must be positive, got {sigma}"
                )));
            }
            offsets
                .iter()
                .map(|&(dx, dy)| {
                    let n2 = (dx * dx + dy * dy) as f64;
                    ((dx, dy), (-n2 / (sigma * sigma)).exp())
                })
                .collect()
        }
        GammaSpec::Fractional { s } => offsets
            .iter()
            .map(|&(dx, dy)| {
                let norm = ((dx * dx + dy * dy) as f64).sqrt();
                ((dx, dy), norm.powf(-1.0 - s))
            })
            .collect(),
        GammaSpec::Uniform => offsets.iter().map(|&h| (h, 1.0)).collect(),
    };
    if let GammaSpec::Fractional { .. } = spec {
        let sq_sum: f64 = weights.iter().map(|&(_, g)| g * g).sum();
        let c = 1.0 / sq_sum.sqrt();
        for (_, g) in &mut weights {
            *g *= c;
        }
    }
    for &((dx, dy), g) in &weights {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma weight at ({dx},{dy}) is {g}; weights must be finite and nonnegative"
            )));
        }
    }
    Ok(weights)
}

/// Directional nonlocal-gradient kernels (one two-tap kernel per nonzero
/// offset of the footprint) and the aggregated nonlocal Laplacian kernel,
/// whose off-center entries are gamma^2(h) with center -sum gamma^2.
pub fn gamma_kernels(
    footprint: &Footprint,
    weights: &[((i32, i32), f64)],
) -> Result<(Vec<Kernel>, Kernel)> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter(
            "gamma footprint has no nonzero offsets".to_string(),
        ));
    }
    for &((dx, dy), g) in weights {
        let gm = weights
            .iter()
            .find(|&&(h, _)| h == (-dx, -dy))
            .map(|&(_, g)| g);
        if gm != Some(g) {
            return Err(Error::InvalidParameter(format!(
                "gamma weights must be symmetric; offset ({dx},{dy}) mismatches its mirror"
            )));
        }
    }
    let mut directional = Vec::with_capacity(weights.len());
    for &((dx, dy), g) in weights {
        let hw = dx.abs();
        let hh = dy.abs();
        let w = (2 * hw + 1) as usize;
        let mut coeffs = vec![0.0; w * (2 * hh + 1) as usize];
        coeffs[((dy + hh) as usize) * w + (dx + hw) as usize] = g;
        coeffs[(hh as usize) * w + hw as usize] = -g;
        directional.push(Kernel::new(hw, hh, coeffs, format!("nl_gamma[{dx},{dy}]")));
    }
    let (hw, hh) = footprint.half_extents();
    let w = (2 * hw + 1) as usize;
    let mut coeffs = vec![0.0; w * (2 * hh + 1) as usize];
    let mut center = 0.0;
    for &((dx, dy), g) in weights {
        coeffs[((dy + hh) as usize) * w + (dx + hw) as usize] = g * g;
        center -= g * g;
    }
    coeffs[(hh as usize) * w + hw as usize] = center;
    let aggregated = Kernel::new(hw, hh, coeffs, "nl_gamma_sq");
    Ok((directional, aggregated))
}

/// An ordered filter bank with the pointwise union of the member supports.
#[derive(Debug, Clone)]
pub struct KernelBank {
    kernels: Vec<Kernel>,
    union_support: Footprint,
}

impl KernelBank {
    pub fn new(kernels: Vec<Kernel>) -> Self {
        let supports: Vec<Footprint> = kernels.iter().map(Kernel::support).collect();
        let union_support = Footprint::union(supports.iter());
        KernelBank {
            kernels,
            union_support,
        }
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn union_support(&self) -> &Footprint {
        &self.union_support
    }

    pub fn supports(&self) -> Vec<Footprint> {
        self.kernels.iter().map(Kernel::support).collect()
    }
}

/// Convolve one plane: out(x) = sum_h k(h) * plane(x-h), with out-of-range
/// reads resolved by the boundary policy.
pub fn convolve_plane(
    plane: &[f64],
    w: usize,
    h: usize,
    kernel: &Kernel,
    policy: BoundaryPolicy,
) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    convolve_plane_into(plane, w, h, kernel, policy, &mut out);
    out
}

pub fn convolve_plane_into(
    plane: &[f64],
    w: usize,
    h: usize,
    kernel: &Kernel,
    policy: BoundaryPolicy,
    out: &mut [f64],
) {
    debug_assert_eq!(plane.len(), w * h);
    debug_assert_eq!(out.len(), w * h);
    let interior = |x: i64, n: usize| x >= 0 && (x as usize) < n;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for &(dx, dy, c) in kernel.nonzero() {
                let sx = x - dx as i64;
                let sy = y - dy as i64;
                let v = if interior(sx, w) && interior(sy, h) {
                    plane[sy as usize * w + sx as usize]
                } else {
                    match (policy.resolve(sx, w), policy.resolve(sy, h)) {
                        (Some(ix), Some(iy)) => plane[iy * w + ix],
                        _ => 0.0,
                    }
                };
                acc += c * v;
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
}

/// 1D preimage of `out_idx` under the index map `x -> clamp(x - offset)`.
#[inline]
fn clamp_preimage(out_idx: usize, offset: i32, n: usize) -> (i64, i64) {
    if n == 1 {
        return (0, 0);
    }
    let off = offset as i64;
    if out_idx == 0 {
        (0, off.min(n as i64 - 1))
    } else if out_idx == n - 1 {
        ((n as i64 - 1 + off).max(0), n as i64 - 1)
    } else {
        let x = out_idx as i64 + off;
        (x, x) // may be out of range; caller checks lo <= hi within grid
    }
}

/// Exact transpose of `convolve_plane(.., kernel, policy)` as a linear map.
///
/// Needed by the solver: the boundary-value operator is built as
/// adjoint-convolution of masked forward convolutions, and its symmetry
/// (hence CG correctness) requires the exact transpose including the
/// boundary folding introduced by replicate reads. Under the zero policy
/// this coincides with convolution by the reflected kernel.
pub fn convolve_transpose_plane_into(
    plane: &[f64],
    w: usize,
    h: usize,
    kernel: &Kernel,
    policy: BoundaryPolicy,
    out: &mut [f64],
) {
    debug_assert_eq!(plane.len(), w * h);
    debug_assert_eq!(out.len(), w * h);
    out.fill(0.0);
    match policy {
        BoundaryPolicy::Zero => {
            // Transpose of zero-padded convolution: correlation with k.
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let mut acc = 0.0;
                    for &(dx, dy, c) in kernel.nonzero() {
                        let sx = x + dx as i64;
                        let sy = y + dy as i64;
                        if sx >= 0 && (sx as usize) < w && sy >= 0 && (sy as usize) < h {
                            acc += c * plane[sy as usize * w + sx as usize];
                        }
                    }
                    out[y as usize * w + x as usize] = acc;
                }
            }
        }
        BoundaryPolicy::Replicate => {
            // out(y) = sum_h k(h) * sum of plane over the preimage box of y.
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for &(dx, dy, c) in kernel.nonzero() {
                        let (x0, x1) = clamp_preimage(x, dx, w);
                        let (y0, y1) = clamp_preimage(y, dy, h);
                        let x0 = x0.max(0);
                        let y0 = y0.max(0);
                        let x1 = x1.min(w as i64 - 1);
                        let y1 = y1.min(h as i64 - 1);
                        if x0 > x1 || y0 > y1 {
                            continue;
                        }
                        if x0 == x1 && y0 == y1 {
                            acc += c * plane[y0 as usize * w + x0 as usize];
                        } else {
                            let mut box_sum = 0.0;
                            for yy in y0..=y1 {
                                let row = yy as usize * w;
                                for xx in x0..=x1 {
                                    box_sum += plane[row + xx as usize];
                                }
                            }
                            acc += c * box_sum;
                        }
                    }
                    out[y * w + x] += acc;
                }
            }
        }
        BoundaryPolicy::Reflect => {
            // Scatter form; reflect folding has no interval structure.
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let v = plane[y as usize * w + x as usize];
                    if v == 0.0 {
                        continue;
                    }
                    for &(dx, dy, c) in kernel.nonzero() {
                        let tx = policy.resolve(x - dx as i64, w);
                        let ty = policy.resolve(y - dy as i64, h);
                        if let (Some(ix), Some(iy)) = (tx, ty) {
                            out[iy * w + ix] += c * v;
                        }
                    }
                }
            }
        }
    }
}

/// Convolve every channel of an image.
pub fn convolve(img: &ImageBuffer, kernel: &Kernel, policy: BoundaryPolicy) -> ImageBuffer {
    let (w, h) = img.dims();
    let mut out = ImageBuffer::new(w, h, img.channels(), 0.0);
    for c in 0..img.channels() {
        let plane = convolve_plane(img.plane(c), w, h, kernel, policy);
        out.plane_mut(c).copy_from_slice(&plane);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_reflects_through_origin() {
        assert_eq!(identity().adjoint().nonzero(), identity().nonzero());
        let lap = laplacian();
        assert_eq!(lap.adjoint().nonzero(), lap.nonzero());
        // grad_x = [0,-1,1] reflects to [1,-1,0].
        let adj = grad_x().adjoint();
        assert_eq!(adj.coeff(-1, 0), 1.0);
        assert_eq!(adj.coeff(0, 0), -1.0);
        assert_eq!(adj.coeff(1, 0), 0.0);
        let adj_y = grad_y().adjoint();
        assert_eq!(adj_y.coeff(0, -1), 1.0);
        assert_eq!(adj_y.coeff(0, 0), -1.0);
        assert_eq!(adj_y.coeff(0, 1), 0.0);
    }

    #[test]
    fn adjoint_is_involutive() {
        for k in [identity(), grad_x(), grad_y(), laplacian()] {
            let back = k.adjoint().adjoint();
            assert_eq!(back.nonzero(), k.nonzero());
        }
    }

    #[test]
    fn compose_with_identity_is_neutral() {
        for k in [grad_x(), grad_y(), laplacian()] {
            let c = identity().compose(&k);
            assert_eq!(c.nonzero(), k.nonzero());
        }
    }

    #[test]
    fn laplacian_squared_is_biharmonic_stencil() {
        let lap = laplacian();
        let bi = lap.compose(&lap.adjoint());
        let expect: [[f64; 5]; 5] = [
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 2.0, -8.0, 2.0, 0.0],
            [1.0, -8.0, 20.0, -8.0, 1.0],
            [0.0, 2.0, -8.0, 2.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        for dy in -2..=2i32 {
            for dx in -2..=2i32 {
                assert_eq!(
                    bi.coeff(dx, dy),
                    expect[(dy + 2) as usize][(dx + 2) as usize]
                );
            }
        }
    }

    #[test]
    fn convolve_identity_is_noop() {
        let img = ImageBuffer::from_fn(7, 5, 1, |_, x, y| (x * 3 + y) as f64 * 0.01);
        let out = convolve(&img, &identity(), BoundaryPolicy::Replicate);
        assert_eq!(out, img);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let img = ImageBuffer::new(9, 9, 1, 0.42);
        for k in [grad_x(), grad_y(), laplacian()] {
            let out = convolve(&img, &k, BoundaryPolicy::Replicate);
            assert!(out.data().iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn grad_x_on_ramp_matches_direct_stencil() {
        // Direct application of out(x) = sum_h k(h) u(x-h) on u = x/W gives
        // u(x-1) - u(x) = -1/W at interior pixels.
        let w = 16;
        let img = ImageBuffer::from_fn(w, 8, 1, |_, x, _| x as f64 / w as f64);
        let out = convolve(&img, &grad_x(), BoundaryPolicy::Replicate);
        for y in 0..8 {
            for x in 1..w {
                assert!(
                    (out.at(0, x, y) - (-1.0 / w as f64)).abs() < 1e-12,
                    "at ({x},{y}): {}",
                    out.at(0, x, y)
                );
            }
        }
    }

    #[test]
    fn gamma_uniform_3x3_gives_eight_neighbor_laplacian() {
        let fp = Footprint::rect(1, 1);
        let weights = gamma_weights(&fp, &GammaSpec::Uniform).unwrap();
        let (dir, agg) = gamma_kernels(&fp, &weights).unwrap();
        assert_eq!(dir.len(), 8);
        for dy in -1..=1i32 {
            for dx in -1..=1i32 {
                let want = if dx == 0 && dy == 0 { -8.0 } else { 1.0 };
                assert_eq!(agg.coeff(dx, dy), want);
            }
        }
    }

    #[test]
    fn gamma_aggregate_matches_stencil_composition() {
        // g_gamma_sq equals -(1/2) sum_i compose(g_i, adjoint(g_i)): the
        // two-tap differences compose to 2*gamma^2 at the center and
        // -gamma^2 at +-h, so the half-sum is the negated aggregate.
        for spec in [
            GammaSpec::Uniform,
            GammaSpec::Gauss { sigma: 1.5 },
            GammaSpec::Fractional { s: -1.0 },
            GammaSpec::Fractional { s: 0.5 },
        ] {
            let fp = Footprint::rect(2, 2);
            let weights = gamma_weights(&fp, &spec).unwrap();
            let (dir, agg) = gamma_kernels(&fp, &weights).unwrap();
            for dy in -2..=2 {
                for dx in -2..=2 {
                    let half_sum: f64 = dir
                        .iter()
                        .map(|g| g.compose(&g.adjoint()).coeff(dx, dy))
                        .sum::<f64>()
                        * 0.5;
                    assert!(
                        (half_sum + agg.coeff(dx, dy)).abs() < 1e-12,
                        "spec {spec:?} offset ({dx},{dy}): {half_sum} vs {}",
                        agg.coeff(dx, dy)
                    );
                }
            }
        }
    }

    #[test]
    fn gamma_aggregate_has_zero_sum() {
        for spec in [
            GammaSpec::Uniform,
            GammaSpec::Gauss { sigma: 3.0 },
            GammaSpec::Fractional { s: 0.25 },
        ] {
            let fp = Footprint::rect(3, 3);
            let weights = gamma_weights(&fp, &spec).unwrap();
            let (_, agg) = gamma_kernels(&fp, &weights).unwrap();
            assert!(agg.sum().abs() < 1e-12);
            for &(dx, dy, c) in agg.nonzero() {
                if dx != 0 || dy != 0 {
                    assert!(c >= 0.0);
                }
            }
        }
    }

    #[test]
    fn fractional_gamma_squared_weights_sum_to_one() {
        let fp = Footprint::rect(2, 2);
        let weights = gamma_weights(&fp, &GammaSpec::Fractional { s: -0.5 }).unwrap();
        let sq: f64 = weights.iter().map(|&(_, g)| g * g).sum();
        assert!((sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_text_kernel() {
        let k = Kernel::parse_text("0 1 0\n1 -4 1\n0 1 0\n", "lap").unwrap();
        assert_eq!(k.nonzero(), laplacian().nonzero());
        assert!(Kernel::parse_text("1 2\n3 4\n", "even").is_err());
    }

    #[test]
    fn transpose_matches_dense_transpose() {
        // Build the forward operator densely on a small grid and check the
        // transpose application against the dense transpose, per policy.
        let (w, h) = (5, 4);
        let n = w * h;
        for policy in [
            BoundaryPolicy::Replicate,
            BoundaryPolicy::Reflect,
            BoundaryPolicy::Zero,
        ] {
            for kernel in [grad_x(), grad_y(), laplacian()] {
                let mut dense = vec![vec![0.0; n]; n];
                for j in 0..n {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    let col = convolve_plane(&e, w, h, &kernel, policy);
                    for (i, &v) in col.iter().enumerate() {
                        dense[i][j] = v;
                    }
                }
                let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
                let mut got = vec![0.0; n];
                convolve_transpose_plane_into(&v, w, h, &kernel, policy, &mut got);
                for i in 0..n {
                    let want: f64 = (0..n).map(|j| dense[j][i] * v[j]).sum();
                    assert!(
                        (got[i] - want).abs() < 1e-12,
                        "{policy:?} {} idx {i}: {} vs {want}",
                        kernel.label(),
                        got[i]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_pad_adjoint_identity_is_exact() {
        // <k*a, b> == <a, adj(k)*b> with zero padding.
        let (w, h) = (8, 6);
        let a: Vec<f64> = (0..w * h).map(|i| ((i * 7 + 3) % 13) as f64 / 13.0).collect();
        let b: Vec<f64> = (0..w * h).map(|i| ((i * 5 + 1) % 11) as f64 / 11.0).collect();
        for k in [grad_x(), grad_y(), laplacian()] {
            let ka = convolve_plane(&a, w, h, &k, BoundaryPolicy::Zero);
            let kb = convolve_plane(&b, w, h, &k.adjoint(), BoundaryPolicy::Zero);
            let lhs: f64 = ka.iter().zip(&b).map(|(x, y)| x * y).sum();
            let rhs: f64 = a.iter().zip(&kb).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
