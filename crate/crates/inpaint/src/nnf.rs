//! The weight-update half-step: per-graph nearest-neighbor fields from the
//! extended region into its complement under the graph's patch distance.
//!
//! In the delta-weight limit the per-graph weights collapse onto the
//! nearest neighbor, so the weight update is a nearest-neighbor-field
//! computation. The exact search is the default and the correctness
//! reference; the accelerated search (random init + scanline propagation +
//! random search) is opt-in for large images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{patch_distance_pruned, FeatureGraph, Features};
use crate::region::RegionSet;

/// One pixel's match: target in the complement and the achieved distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NNEntry {
    pub target: (usize, usize),
    pub distance: f64,
}

/// Nearest-neighbor field of one graph; entries exist for the pixels of
/// the extended region where the graph carries partition mass.
#[derive(Debug, Clone)]
pub struct NNField {
    width: usize,
    height: usize,
    entries: Vec<Option<NNEntry>>,
}

impl NNField {
    fn new(width: usize, height: usize) -> Self {
        NNField {
            width,
            height,
            entries: vec![None; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<NNEntry> {
        self.entries[y * self.width + x]
    }

    fn set(&mut self, x: usize, y: usize, e: NNEntry) {
        self.entries[y * self.width + x] = Some(e);
    }

    /// Assemble a field from explicit entries (fixtures, deserialization).
    pub fn from_entries(
        width: usize,
        height: usize,
        entries: Vec<((usize, usize), NNEntry)>,
    ) -> Self {
        let mut field = NNField::new(width, height);
        for ((x, y), e) in entries {
            field.set(x, y, e);
        }
        field
    }

    /// Pixels carrying an entry, row-major.
    pub fn computed_pixels(&self) -> impl Iterator<Item = ((usize, usize), NNEntry)> + '_ {
        let w = self.width;
        self.entries
            .iter()
            .enumerate()
            .filter_map(move |(i, e)| e.map(|e| ((i % w, i / w), e)))
    }

    /// Diagnostic dump: one line "x y -> tx ty dist" per pixel, row-major.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for ((x, y), e) in self.computed_pixels() {
            out.push_str(&format!(
                "{} {} -> {} {} {}\n",
                x, y, e.target.0, e.target.1, e.distance
            ));
        }
        out
    }
}

/// Pixels of the extended region that the graph's weight update must
/// cover: those whose patch window still sees partition mass. Where the
/// whole window is zero the graph contributes nothing to either the energy
/// or the auxiliary fields, so the match is skipped.
pub fn active_pixels(graph: &FeatureGraph, regions: &RegionSet) -> Vec<(usize, usize)> {
    let (w, h) = regions.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !regions.patch_extended.get(x, y) {
                continue;
            }
            let covered = graph.patch.entries().iter().any(|&(dx, dy, _)| {
                let sx = (x as i64 - dx as i64).clamp(0, w as i64 - 1) as usize;
                let sy = (y as i64 - dy as i64).clamp(0, h as i64 - 1) as usize;
                graph.partition.at(sx, sy) > 0.0
            });
            if covered {
                out.push((x, y));
            }
        }
    }
    out
}

fn candidate_list(regions: &RegionSet) -> Result<Vec<(usize, usize)>> {
    let list = regions.patch_extended.complement_pixels();
    if list.is_empty() {
        return Err(Error::NoExemplars);
    }
    Ok(list)
}

/// Exact nearest-neighbor field: for every covered pixel of the extended
/// region, the row-major-first argmin of the patch distance over the
/// complement. Ties break to the smallest row-major candidate index.
pub fn compute_nnf_exact(
    features: &Features,
    graph: &FeatureGraph,
    regions: &RegionSet,
) -> Result<NNField> {
    let candidates = candidate_list(regions)?;
    let (w, h) = regions.dims();
    let pixels = active_pixels(graph, regions);
    let entries: Vec<NNEntry> = pixels
        .par_iter()
        .map(|&x| {
            let mut best = NNEntry {
                target: candidates[0],
                distance: f64::INFINITY,
            };
            for &y in &candidates {
                // A partial sum reaching the incumbent distance certifies the
                // candidate cannot win: equal distances lose the index tie.
                let d = patch_distance_pruned(features, graph, x, y, best.distance);
                if d < best.distance {
                    best = NNEntry {
                        target: y,
                        distance: d,
                    };
                }
            }
            best
        })
        .collect();
    let mut field = NNField::new(w, h);
    for (&(x, y), &e) in pixels.iter().zip(&entries) {
        field.set(x, y, e);
    }
    Ok(field)
}

/// Approximate nearest-neighbor field via random initialization, scanline
/// propagation and halving-radius random search. Deterministic for a given
/// seed; every achieved distance is a genuine candidate evaluation, hence
/// at least the exact minimum. An optional prior field seeds the search,
/// in which case per-pixel distances never exceed the re-evaluated prior.
pub fn compute_nnf_accelerated(
    features: &Features,
    graph: &FeatureGraph,
    regions: &RegionSet,
    iterations: usize,
    seed: u64,
    prior: Option<&NNField>,
) -> Result<NNField> {
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "accelerated search needs at least one iteration".to_string(),
        ));
    }
    let candidates = candidate_list(regions)?;
    let (w, h) = regions.dims();
    let pixels = active_pixels(graph, regions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = NNField::new(w, h);

    let is_candidate = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && !regions.patch_extended.get(x as usize, y as usize)
    };

    for &x in &pixels {
        let target = match prior.and_then(|p| p.get(x.0, x.1)) {
            Some(e) if is_candidate(e.target.0 as i64, e.target.1 as i64) => e.target,
            _ => candidates[rng.gen_range(0..candidates.len())],
        };
        let distance = patch_distance_pruned(features, graph, x, target, f64::INFINITY);
        field.set(x.0, x.1, NNEntry { target, distance });
    }

    let max_radius = w.max(h) as i64;
    for it in 0..iterations {
        let forward = it % 2 == 0;
        let order: Box<dyn Iterator<Item = &(usize, usize)>> = if forward {
            Box::new(pixels.iter())
        } else {
            Box::new(pixels.iter().rev())
        };
        let step: i64 = if forward { 1 } else { -1 };
        for &x in order {
            let mut best = field.get(x.0, x.1).unwrap();
            // Propagation: shift the neighbors' matches by the same offset.
            // The trailing pair carries this sweep's fresh matches; the
            // leading pair recycles the previous sweep's.
            for (nx, ny) in [(step, 0), (0, step), (-step, 0), (0, -step)] {
                let px = x.0 as i64 - nx;
                let py = x.1 as i64 - ny;
                if px < 0 || py < 0 || px as usize >= w || py as usize >= h {
                    continue;
                }
                if let Some(n) = field.get(px as usize, py as usize) {
                    let tx = n.target.0 as i64 + nx;
                    let ty = n.target.1 as i64 + ny;
                    if is_candidate(tx, ty) {
                        let cand = (tx as usize, ty as usize);
                        let d = patch_distance_pruned(features, graph, x, cand, best.distance);
                        if d < best.distance {
                            best = NNEntry {
                                target: cand,
                                distance: d,
                            };
                        }
                    }
                }
            }
            // Random search around the current target, plus uniform
            // re-seeds over the whole candidate list.
            for _ in 0..2 {
                let uniform = candidates[rng.gen_range(0..candidates.len())];
                let d = patch_distance_pruned(features, graph, x, uniform, best.distance);
                if d < best.distance {
                    best = NNEntry {
                        target: uniform,
                        distance: d,
                    };
                }
            }
            let mut radius = max_radius;
            while radius >= 1 {
                for _ in 0..2 {
                    let dx = rng.gen_range(-radius..=radius);
                    let dy = rng.gen_range(-radius..=radius);
                    let tx = best.target.0 as i64 + dx;
                    let ty = best.target.1 as i64 + dy;
                    if is_candidate(tx, ty) {
                        let cand = (tx as usize, ty as usize);
                        let d = patch_distance_pruned(features, graph, x, cand, best.distance);
                        if d < best.distance {
                            best = NNEntry {
                                target: cand,
                                distance: d,
                            };
                        }
                    }
                }
                radius /= 2;
            }
            field.set(x.0, x.1, best);
        }
    }
    Ok(field)
}

/// Normalized soft weights over the complement for one probed pixel
/// (diagnostic mode; the production path uses the delta-weight limit).
#[derive(Debug, Clone)]
pub struct SoftWeightField {
    pub candidates: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

/// w(x,y) = exp(-d(x,y)/sigma) / sum_y' exp(-d(x,y')/sigma), computed with
/// min-distance subtraction for stability.
pub fn compute_soft_weights(
    features: &Features,
    graph: &FeatureGraph,
    regions: &RegionSet,
    x: (usize, usize),
) -> Result<SoftWeightField> {
    let sigma = match graph.selectivity {
        Some(s) if s > 0.0 => s,
        _ => {
            return Err(Error::InvalidParameter(
                "soft weights need a positive selectivity".to_string(),
            ))
        }
    };
    let candidates = candidate_list(regions)?;
    let distances: Vec<f64> = candidates
        .par_iter()
        .map(|&y| patch_distance_pruned(features, graph, x, y, f64::INFINITY))
        .collect();
    let min = distances.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut weights: Vec<f64> = distances.iter().map(|&d| (-(d - min) / sigma).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(SoftWeightField {
        candidates,
        weights,
    })
}
