//! Patch weight measures, the multi-feature patch distance, and the
//! edge-guided anisotropic dominance field.
//!
//! The distance between pixels x and y for graph j is
//!
//! ```text
//! d_j(x,y) = sum_i sum_h lambda_ij(x+h) |F_i(x+h) - F_i(y+h)|^2 dP_j(h)
//! ```
//!
//! with F_i the feature images (filter responses) of the current image and
//! dP_j the patch probability measure. Patch offsets falling outside the
//! grid are read at clamped coordinates, so the same discrete functional is
//! shared by the weight update, the energy and the image update.

use crate::error::{Error, Result};
use crate::filters::{convolve_plane, BoundaryPolicy, KernelBank};
use crate::raster::{ImageBuffer, RegionMask};
use crate::region::Footprint;

/// Centered rectangular patch with a probability measure over its offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpec {
    half_w: i32,
    half_h: i32,
    entries: Vec<(i32, i32, f64)>,
}

impl PatchSpec {
    /// Gaussian measure exp(-|h|^2/sigma^2) normalized to sum 1;
    /// an infinite sigma yields the uniform measure.
    pub fn new(size_w: usize, size_h: usize, sigma: f64) -> Result<Self> {
        if size_w % 2 == 0 || size_h % 2 == 0 || size_w == 0 || size_h == 0 {
            return Err(Error::InvalidParameter(format!(
                "patch dimensions must be odd and positive, got {size_w}x{size_h}"
            )));
        }
        if !(sigma > 0.0) && !sigma.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "patch sigma must be positive (or inf for uniform), got {sigma}"
            )));
        }
        let half_w = (size_w as i32 - 1) / 2;
        let half_h = (size_h as i32 - 1) / 2;
        let mut entries = Vec::with_capacity(size_w * size_h);
        let mut total = 0.0;
        for dy in -half_h..=half_h {
            for dx in -half_w..=half_w {
                let w = if sigma.is_infinite() {
                    1.0
                } else {
                    let n2 = (dx * dx + dy * dy) as f64;
                    (-n2 / (sigma * sigma)).exp()
                };
                entries.push((dx, dy, w));
                total += w;
            }
        }
        for (_, _, w) in &mut entries {
            *w /= total;
        }
        Ok(PatchSpec {
            half_w,
            half_h,
            entries,
        })
    }

    pub fn uniform(size_w: usize, size_h: usize) -> Result<Self> {
        PatchSpec::new(size_w, size_h, f64::INFINITY)
    }

    /// Offsets with their measure weights, row-major.
    pub fn entries(&self) -> &[(i32, i32, f64)] {
        &self.entries
    }

    pub fn footprint(&self) -> Footprint {
        Footprint::rect(self.half_w, self.half_h)
    }

    pub fn half_extents(&self) -> (i32, i32) {
        (self.half_w, self.half_h)
    }

    pub fn dims(&self) -> (usize, usize) {
        ((2 * self.half_w + 1) as usize, (2 * self.half_h + 1) as usize)
    }
}

/// Per-pixel nonnegative weight controlling how strongly a filter
/// influences a graph's metric.
#[derive(Debug, Clone, PartialEq)]
pub enum DominanceField {
    Constant(f64),
    Field {
        width: usize,
        height: usize,
        values: Vec<f64>,
    },
}

impl DominanceField {
    pub fn field(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParameter(
                "dominance field size does not match its grid".to_string(),
            ));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "dominance values must be nonnegative".to_string(),
            ));
        }
        Ok(DominanceField::Field {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        match self {
            DominanceField::Constant(c) => *c,
            DominanceField::Field { width, values, .. } => values[y * width + x],
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            DominanceField::Constant(c) => *c == 0.0,
            DominanceField::Field { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn scaled(&self, factor: f64) -> DominanceField {
        match self {
            DominanceField::Constant(c) => DominanceField::Constant(c * factor),
            DominanceField::Field {
                width,
                height,
                values,
            } => DominanceField::Field {
                width: *width,
                height: *height,
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }
}

/// Per-pixel contribution of one graph; the fields of all graphs sum to one
/// at every pixel after renormalization.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionField {
    Constant(f64),
    Field {
        width: usize,
        height: usize,
        values: Vec<f64>,
    },
}

impl PartitionField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        match self {
            PartitionField::Constant(c) => *c,
            PartitionField::Field { width, values, .. } => values[y * width + x],
        }
    }
}

/// Renormalize a set of partition fields pixel-wise to sum to one.
/// Errors if the sum vanishes at a pixel where `required` is set.
pub fn normalize_partitions(
    fields: Vec<PartitionField>,
    required: &RegionMask,
) -> Result<Vec<PartitionField>> {
    let all_const = fields
        .iter()
        .all(|f| matches!(f, PartitionField::Constant(_)));
    if all_const {
        let sum: f64 = fields
            .iter()
            .map(|f| match f {
                PartitionField::Constant(c) => *c,
                _ => unreachable!(),
            })
            .sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter(
                "partition weights sum to zero".to_string(),
            ));
        }
        return Ok(fields
            .iter()
            .map(|f| match f {
                PartitionField::Constant(c) => PartitionField::Constant(c / sum),
                _ => unreachable!(),
            })
            .collect());
    }
    let (w, h) = required.dims();
    let mut planes: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| {
            (0..w * h)
                .map(|idx| f.at(idx % w, idx / w))
                .collect::<Vec<f64>>()
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let sum: f64 = planes.iter().map(|p| p[idx]).sum();
            if sum <= 0.0 {
                if required.get(x, y) {
                    return Err(Error::InvalidParameter(format!(
                        "partition weights are all zero at pixel ({x},{y}) inside the working region"
                    )));
                }
                continue;
            }
            for p in &mut planes {
                p[idx] /= sum;
            }
        }
    }
    Ok(planes
        .into_iter()
        .map(|values| PartitionField::Field {
            width: w,
            height: h,
            values,
        })
        .collect())
}

/// One feature graph: patch measure, selectivity, per-filter dominance
/// fields and the graph's partition weight.
#[derive(Debug, Clone)]
pub struct FeatureGraph {
    pub patch: PatchSpec,
    /// None selects the delta-weight (nearest-neighbor) limit; a finite
    /// positive value enables the soft-weight diagnostic mode.
    pub selectivity: Option<f64>,
    /// (kernel index into the bank, dominance field) pairs.
    pub dominance: Vec<(usize, DominanceField)>,
    pub partition: PartitionField,
}

impl FeatureGraph {
    pub fn new(
        patch: PatchSpec,
        selectivity: Option<f64>,
        dominance: Vec<(usize, DominanceField)>,
        partition: PartitionField,
    ) -> Result<Self> {
        if let Some(s) = selectivity {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "selectivity must be positive, got {s}"
                )));
            }
        }
        if dominance.iter().all(|(_, f)| f.is_identically_zero()) {
            return Err(Error::InvalidParameter(
                "a feature graph needs at least one filter with nonzero dominance".to_string(),
            ));
        }
        Ok(FeatureGraph {
            patch,
            selectivity,
            dominance,
            partition,
        })
    }
}

/// Filter responses of one image, computed once per image update.
///
/// Kernels with more than two taps are materialized as planes; two-tap
/// kernels (the nonlocal gamma family can hold hundreds) are evaluated on
/// the fly to keep memory bounded.
pub struct Features<'a> {
    image: &'a ImageBuffer,
    bank: &'a KernelBank,
    policy: BoundaryPolicy,
    planes: Vec<Option<ImageBuffer>>,
}

impl<'a> Features<'a> {
    pub fn compute(image: &'a ImageBuffer, bank: &'a KernelBank, policy: BoundaryPolicy) -> Self {
        let (w, h) = image.dims();
        let planes = bank
            .kernels()
            .iter()
            .map(|k| {
                if k.nonzero().len() <= 2 {
                    None
                } else {
                    let mut out = ImageBuffer::new(w, h, image.channels(), 0.0);
                    for c in 0..image.channels() {
                        let plane = convolve_plane(image.plane(c), w, h, k, policy);
                        out.plane_mut(c).copy_from_slice(&plane);
                    }
                    Some(out)
                }
            })
            .collect();
        Features {
            image,
            bank,
            policy,
            planes,
        }
    }

    pub fn image(&self) -> &ImageBuffer {
        self.image
    }

    pub fn bank(&self) -> &KernelBank {
        self.bank
    }

    pub fn policy(&self) -> BoundaryPolicy {
        self.policy
    }

    pub fn channels(&self) -> usize {
        self.image.channels()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    /// Feature value (g_i * u)_c at an in-grid pixel.
    #[inline]
    pub fn value(&self, filter: usize, channel: usize, x: usize, y: usize) -> f64 {
        match &self.planes[filter] {
            Some(plane) => plane.at(channel, x, y),
            None => {
                let (w, h) = self.image.dims();
                let mut acc = 0.0;
                for &(dx, dy, c) in self.bank.kernels()[filter].nonzero() {
                    let sx = self.policy.resolve(x as i64 - dx as i64, w);
                    let sy = self.policy.resolve(y as i64 - dy as i64, h);
                    if let (Some(ix), Some(iy)) = (sx, sy) {
                        acc += c * self.image.at(channel, ix, iy);
                    }
                }
                acc
            }
        }
    }
}

/// Generalized patch distance d_j between two pixels; total over the grid,
/// out-of-range patch offsets are read at clamped coordinates.
pub fn patch_distance(
    features: &Features,
    graph: &FeatureGraph,
    x: (usize, usize),
    y: (usize, usize),
) -> f64 {
    patch_distance_pruned(features, graph, x, y, f64::INFINITY)
}

/// As `patch_distance`, returning early once the partial sum reaches
/// `prune_at`. All terms are nonnegative, so a partial sum at or above the
/// threshold certifies the full distance is too.
pub fn patch_distance_pruned(
    features: &Features,
    graph: &FeatureGraph,
    x: (usize, usize),
    y: (usize, usize),
    prune_at: f64,
) -> f64 {
    let (w, h) = features.dims();
    let channels = features.channels();
    let (xw, xh) = (x.0 as i64, x.1 as i64);
    let (yw, yh) = (y.0 as i64, y.1 as i64);
    let mut sum = 0.0;
    for &(dx, dy, pw) in graph.patch.entries() {
        let xs = ((xw + dx as i64).clamp(0, w as i64 - 1)) as usize;
        let ys = ((xh + dy as i64).clamp(0, h as i64 - 1)) as usize;
        let xt = ((yw + dx as i64).clamp(0, w as i64 - 1)) as usize;
        let yt = ((yh + dy as i64).clamp(0, h as i64 - 1)) as usize;
        let mut term = 0.0;
        for (ki, lam) in &graph.dominance {
            let l = lam.at(xs, ys);
            if l == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for c in 0..channels {
                let d = features.value(*ki, c, xs, ys) - features.value(*ki, c, xt, yt);
                acc += d * d;
            }
            term += l * acc;
        }
        sum += pw * term;
        if sum >= prune_at {
            return sum;
        }
    }
    sum
}

/// Exact Euclidean distance from every pixel to the nearest set pixel of
/// the map; all-infinite when the map is empty.
///
/// Column pre-pass plus the lower-envelope-of-parabolas row pass on squared
/// distances, so the result is exact.
pub fn distance_transform(edges: &RegionMask) -> Vec<f64> {
    let (w, h) = edges.dims();
    let mut colsq = vec![f64::INFINITY; w * h];
    for x in 0..w {
        let mut dist: i64 = i64::MAX / 4;
        for y in 0..h {
            if edges.get(x, y) {
                dist = 0;
            } else if dist < i64::MAX / 4 {
                dist += 1;
            }
            if dist < i64::MAX / 4 {
                colsq[y * w + x] = (dist * dist) as f64;
            }
        }
        dist = i64::MAX / 4;
        for y in (0..h).rev() {
            if edges.get(x, y) {
                dist = 0;
            } else if dist < i64::MAX / 4 {
                dist += 1;
            }
            if dist < i64::MAX / 4 {
                let v = (dist * dist) as f64;
                if v < colsq[y * w + x] {
                    colsq[y * w + x] = v;
                }
            }
        }
    }
    let mut out = vec![f64::INFINITY; w * h];
    let mut sites = vec![0usize; w];
    let mut bounds = vec![0.0f64; w + 1];
    for y in 0..h {
        let row = &colsq[y * w..(y + 1) * w];
        let mut k = 0usize;
        let mut started = false;
        for q in 0..w {
            if row[q].is_infinite() {
                continue;
            }
            if !started {
                sites[0] = q;
                bounds[0] = f64::NEG_INFINITY;
                bounds[1] = f64::INFINITY;
                started = true;
                continue;
            }
            let mut s;
            loop {
                let p = sites[k];
                s = ((row[q] + (q * q) as f64) - (row[p] + (p * p) as f64))
                    / (2.0 * (q as f64 - p as f64));
                if s <= bounds[k] && k > 0 {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            sites[k] = q;
            bounds[k] = s;
            bounds[k + 1] = f64::INFINITY;
        }
        if !started {
            continue;
        }
        let mut j = 0usize;
        for q in 0..w {
            while bounds[j + 1] < q as f64 {
                j += 1;
            }
            let p = sites[j];
            let dq = q as f64 - p as f64;
            out[y * w + q] = (row[p] + dq * dq).sqrt();
        }
    }
    out
}

/// Edge-guided anisotropic coefficient
/// `lambda(x) = (1 - lambda_a) exp(-DT(E(x))/tau) + lambda_a`.
pub fn aniso_lambda(edges: &RegionMask, lambda_a: f64, tau: f64) -> Result<DominanceField> {
    if !(0.0..=1.0).contains(&lambda_a) {
        return Err(Error::InvalidParameter(format!(
            "lambda_a must lie in [0,1], got {lambda_a}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let dt = distance_transform(edges);
    let values = dt
        .iter()
        .map(|&d| (1.0 - lambda_a) * (-d / tau).exp() + lambda_a)
        .collect();
    let (w, h) = edges.dims();
    DominanceField::field(w, h, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters;

    fn single_graph(patch: PatchSpec, lam: f64) -> FeatureGraph {
        FeatureGraph::new(
            patch,
            None,
            vec![(0, DominanceField::Constant(lam))],
            PartitionField::Constant(1.0),
        )
        .unwrap()
    }

    #[test]
    fn patch_measure_1x1() {
        let p = PatchSpec::new(1, 1, 2.0).unwrap();
        assert_eq!(p.entries(), &[(0, 0, 1.0)]);
    }

    #[test]
    fn patch_measure_uniform_3x3() {
        let p = PatchSpec::uniform(3, 3).unwrap();
        assert_eq!(p.entries().len(), 9);
        for &(_, _, w) in p.entries() {
            assert!((w - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn patch_measure_gauss_3x3() {
        // Direct normalized-exponential evaluation: weights are
        // exp(-|h|^2)/Z with Z = 1 + 4e^-1 + 4e^-2.
        let p = PatchSpec::new(3, 3, 1.0).unwrap();
        let z = 1.0 + 4.0 * (-1.0f64).exp() + 4.0 * (-2.0f64).exp();
        for &(dx, dy, w) in p.entries() {
            let n2 = (dx * dx + dy * dy) as f64;
            assert!((w - (-n2).exp() / z).abs() < 1e-15);
        }
        let total: f64 = p.entries().iter().map(|e| e.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Frozen values of the three distinct weights.
        let center = p.entries().iter().find(|e| (e.0, e.1) == (0, 0)).unwrap().2;
        let edge = p.entries().iter().find(|e| (e.0, e.1) == (1, 0)).unwrap().2;
        let corner = p.entries().iter().find(|e| (e.0, e.1) == (1, 1)).unwrap().2;
        assert!((center - 0.3319106649122836).abs() < 1e-12);
        assert!((edge - 0.12210310992677274).abs() < 1e-12);
        assert!((corner - 0.04491922384515635).abs() < 1e-12);
    }

    #[test]
    fn patch_measure_rejects_bad_sigma() {
        assert!(PatchSpec::new(3, 3, 0.0).is_err());
        assert!(PatchSpec::new(3, 3, -1.0).is_err());
        assert!(PatchSpec::new(4, 3, 1.0).is_err());
    }

    #[test]
    fn distance_vanishes_on_diagonal_and_constants() {
        let img = ImageBuffer::from_fn(8, 8, 1, |_, x, y| ((x * y) % 5) as f64 / 5.0);
        let bank = KernelBank::new(vec![filters::identity()]);
        let f = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let g = single_graph(PatchSpec::uniform(3, 3).unwrap(), 1.0);
        assert_eq!(patch_distance(&f, &g, (4, 4), (4, 4)), 0.0);

        let flat = ImageBuffer::new(8, 8, 1, 0.6);
        let ff = Features::compute(&flat, &bank, BoundaryPolicy::Replicate);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(patch_distance(&ff, &g, (3, 3), (x, y)), 0.0);
            }
        }
    }

    #[test]
    fn distance_matches_nine_term_oracle() {
        // 8x8 two-tone image, identity filter, uniform 3x3 patch.
        let img = ImageBuffer::from_fn(8, 8, 1, |_, x, _| if x < 4 { 0.2 } else { 0.9 });
        let bank = KernelBank::new(vec![filters::identity()]);
        let f = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let g = single_graph(PatchSpec::uniform(3, 3).unwrap(), 1.0);
        let (x, y) = ((3, 3), (5, 4));
        let mut oracle = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let a = img.at_clamped(0, x.0 + dx, x.1 + dy);
                let b = img.at_clamped(0, y.0 + dx, y.1 + dy);
                oracle += (a - b) * (a - b) / 9.0;
            }
        }
        let got = patch_distance(&f, &g, (x.0 as usize, x.1 as usize), (y.0 as usize, y.1 as usize));
        assert!((got - oracle).abs() < 1e-15, "{got} vs {oracle}");
    }

    #[test]
    fn distance_symmetry_and_scaling() {
        let img = ImageBuffer::from_fn(10, 9, 1, |_, x, y| ((x * 13 + y * 7) % 11) as f64 / 11.0);
        let bank = KernelBank::new(vec![filters::identity(), filters::grad_x()]);
        let f = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let mk = |lam: f64| {
            FeatureGraph::new(
                PatchSpec::new(3, 3, 2.0).unwrap(),
                None,
                vec![
                    (0, DominanceField::Constant(lam)),
                    (1, DominanceField::Constant(0.5 * lam)),
                ],
                PartitionField::Constant(1.0),
            )
            .unwrap()
        };
        let g1 = mk(1.0);
        let g3 = mk(3.0);
        for &(x, y) in &[((2, 2), (7, 5)), ((4, 6), (8, 1)), ((5, 5), (1, 7))] {
            let d_xy = patch_distance(&f, &g1, x, y);
            let d_yx = patch_distance(&f, &g1, y, x);
            assert!((d_xy - d_yx).abs() < 1e-12);
            assert!(d_xy >= 0.0);
            let scaled = patch_distance(&f, &g3, x, y);
            assert!((scaled - 3.0 * d_xy).abs() < 1e-12);
        }
    }

    #[test]
    fn adding_a_filter_never_decreases_distance() {
        let img = ImageBuffer::from_fn(10, 10, 1, |_, x, y| ((x + 2 * y) % 7) as f64 / 7.0);
        let bank = KernelBank::new(vec![filters::identity(), filters::laplacian()]);
        let f = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let base = single_graph(PatchSpec::uniform(3, 3).unwrap(), 1.0);
        let extended = FeatureGraph::new(
            PatchSpec::uniform(3, 3).unwrap(),
            None,
            vec![
                (0, DominanceField::Constant(1.0)),
                (1, DominanceField::Constant(0.7)),
            ],
            PartitionField::Constant(1.0),
        )
        .unwrap();
        for &(x, y) in &[((2, 2), (7, 5)), ((4, 6), (8, 1))] {
            assert!(patch_distance(&f, &extended, x, y) >= patch_distance(&f, &base, x, y));
        }
    }

    #[test]
    fn distance_transform_small_cases() {
        let mut edges = RegionMask::new(8, 8, false);
        edges.set(0, 0, true);
        let dt = distance_transform(&edges);
        assert_eq!(dt[0], 0.0);
        assert!((dt[4 * 8 + 3] - 5.0).abs() < 1e-12); // 3-4-5 triangle
        let empty = RegionMask::new(4, 4, false);
        assert!(distance_transform(&empty).iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        // Deterministic pseudo-random maps up to 32x32.
        for seed in 0..6u64 {
            let w = 9 + (seed as usize * 5) % 24;
            let h = 7 + (seed as usize * 3) % 26;
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let edges = RegionMask::from_fn(w, h, |_, _| next() % 11 == 0);
            let dt = distance_transform(&edges);
            let sites = edges.pixels();
            for y in 0..h {
                for x in 0..w {
                    let brute = sites
                        .iter()
                        .map(|&(sx, sy)| {
                            let dx = sx as f64 - x as f64;
                            let dy = sy as f64 - y as f64;
                            (dx * dx + dy * dy).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    let got = dt[y * w + x];
                    if brute.is_infinite() {
                        assert!(got.is_infinite());
                    } else {
                        assert!(
                            (got - brute).abs() < 1e-9,
                            "{w}x{h} at ({x},{y}): {got} vs {brute}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn aniso_lambda_closed_form() {
        let mut edges = RegionMask::new(41, 3, false);
        edges.set(0, 1, true);
        let lam = aniso_lambda(&edges, 0.1, 20.0).unwrap();
        assert!((lam.at(0, 1) - 1.0).abs() < 1e-12);
        // DT = 20 at x = 20 in the edge row.
        let want = 0.9 * (-1.0f64).exp() + 0.1;
        assert!((lam.at(20, 1) - want).abs() < 1e-12);
        assert!((want - 0.43109149705429817).abs() < 1e-12);
        // Far away the value approaches lambda_a from above.
        let empty = RegionMask::new(4, 4, false);
        let asym = aniso_lambda(&empty, 0.1, 20.0).unwrap();
        assert!((asym.at(2, 2) - 0.1).abs() < 1e-15);
        assert!(aniso_lambda(&edges, 0.1, 0.0).is_err());
        assert!(aniso_lambda(&edges, 1.5, 1.0).is_err());
    }

    #[test]
    fn partition_normalization() {
        let req = RegionMask::new(2, 2, true);
        let fields = vec![
            PartitionField::Constant(2.0),
            PartitionField::Constant(6.0),
        ];
        let out = normalize_partitions(fields, &req).unwrap();
        assert!((out[0].at(0, 0) - 0.25).abs() < 1e-15);
        assert!((out[1].at(0, 0) - 0.75).abs() < 1e-15);

        let fields = vec![
            PartitionField::Field {
                width: 2,
                height: 1,
                values: vec![1.0, 0.0],
            },
            PartitionField::Field {
                width: 2,
                height: 1,
                values: vec![1.0, 0.0],
            },
        ];
        let req = RegionMask::new(2, 1, true);
        assert!(normalize_partitions(fields, &req).is_err());
    }
}
