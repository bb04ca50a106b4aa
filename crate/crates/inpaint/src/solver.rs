//! The image-update half-step: auxiliary fields from the current
//! nearest-neighbor fields, the Euler-Lagrange boundary-value problem, and
//! its solvers.
//!
//! With delta weights the auxiliary fields are
//!
//! ```text
//! k_j(z)  = sum_h beta_j(z-h) dP_j(h)
//! f_ij(z) = sum_h beta_j(z-h) (g_i*u)(NNF_j(z-h)+h) dP_j(h)
//! ```
//!
//! and the update solves, for x in the inpainting region with Dirichlet
//! data outside,
//!
//! ```text
//! sum_ij adj(g_i) * (1_{O*} lambda_ij k_j (g_i*u)) = sum_ij adj(g_i) * (1_{O*} lambda_ij f_ij).
//! ```
//!
//! The operator is applied matrix-free through convolutions, with the
//! exact transpose of the boundary-resolved forward convolution so the
//! system stays symmetric; only the diagonal is materialized for
//! preconditioning. Sources z-h outside the extended region keep the known
//! image as their own exemplar (the nearest-neighbor map extends as the
//! identity there), which makes those forcing terms reproduce the image
//! and keeps the discrete energy identical to the alternation energy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{
    convolve_plane_into, convolve_transpose_plane_into, BoundaryPolicy, KernelBank,
};
use crate::metric::{patch_distance, DominanceField, FeatureGraph, Features};
use crate::nnf::NNField;
use crate::raster::{ImageBuffer, RegionMask};
use crate::region::{Footprint, RegionSet};

/// Fixed chunking for the kernel loop inside operator application; a
/// constant group count keeps float accumulation order independent of the
/// thread pool.
const APPLY_GROUPS: usize = 16;

/// k_j plane, folded onto the grid.
///
/// The plane iterates patch-shifted positions z one patch half-extent
/// beyond the frame: positions outside the grid are energy terms whose
/// feature value reads at the clamped edge pixel, so their mass folds onto
/// that pixel. Sources z-h outside the grid correspond to no patch center
/// and are dropped. This keeps the assembled objective identical to the
/// alternation energy (up to weight-step constants) for any mask,
/// including masks touching the frame.
fn coverage_plane(graph: &FeatureGraph, regions: &RegionSet) -> Vec<f64> {
    let (w, h) = regions.dims();
    let (phw, phh) = graph.patch.half_extents();
    let mut out = vec![0.0; w * h];
    for zy in -(phh as i64)..h as i64 + phh as i64 {
        for zx in -(phw as i64)..w as i64 + phw as i64 {
            let px = zx.clamp(0, w as i64 - 1) as usize;
            let py = zy.clamp(0, h as i64 - 1) as usize;
            if !regions.filter_extended.get(px, py) {
                continue;
            }
            let mut acc = 0.0;
            for &(dx, dy, pw) in graph.patch.entries() {
                let sx = zx - dx as i64;
                let sy = zy - dy as i64;
                if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                    continue;
                }
                acc += graph.partition.at(sx as usize, sy as usize) * pw;
            }
            out[py * w + px] += acc;
        }
    }
    out
}

/// f_ij plane for one (graph, kernel, channel) on the full grid.
///
/// Sources inside the extended region follow their nearest-neighbor match;
/// sources outside it are their own exemplar. Reads that leave the grid
/// are clamped.
fn forcing_plane(
    graph: &FeatureGraph,
    nnf: &NNField,
    features: &Features,
    regions: &RegionSet,
    kernel_idx: usize,
    channel: usize,
) -> Vec<f64> {
    let (w, h) = regions.dims();
    let (phw, phh) = graph.patch.half_extents();
    let rows: Vec<Vec<f64>> = (-(phh as i64)..h as i64 + phh as i64)
        .into_par_iter()
        .map(|zy| {
            let mut row = vec![0.0; w];
            let py = zy.clamp(0, h as i64 - 1) as usize;
            for zx in -(phw as i64)..w as i64 + phw as i64 {
                let px = zx.clamp(0, w as i64 - 1) as usize;
                if !regions.filter_extended.get(px, py) {
                    continue;
                }
                let mut acc = 0.0;
                for &(dx, dy, pw) in graph.patch.entries() {
                    let sx = zx - dx as i64;
                    let sy = zy - dy as i64;
                    if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                        continue;
                    }
                    let (sx, sy) = (sx as usize, sy as usize);
                    let beta = graph.partition.at(sx, sy);
                    if beta == 0.0 {
                        continue;
                    }
                    let target = if regions.patch_extended.get(sx, sy) {
                        nnf.get(sx, sy).map(|e| e.target).unwrap_or((sx, sy))
                    } else {
                        (sx, sy)
                    };
                    let tx = (target.0 as i64 + dx as i64).clamp(0, w as i64 - 1) as usize;
                    let ty = (target.1 as i64 + dy as i64).clamp(0, h as i64 - 1) as usize;
                    acc += beta * pw * features.value(kernel_idx, channel, tx, ty);
                }
                row[px] += acc;
            }
            row
        })
        .collect();
    let mut out = vec![0.0; w * h];
    for (i, row) in rows.into_iter().enumerate() {
        let zy = i as i64 - phh as i64;
        let py = zy.clamp(0, h as i64 - 1) as usize;
        for x in 0..w {
            out[py * w + x] += row[x];
        }
    }
    out
}

/// Materialized auxiliary fields; the pipeline streams them instead, this
/// form exists for inspection and tests.
pub struct AuxFields {
    /// Per graph: k_j plane.
    pub coverage: Vec<Vec<f64>>,
    /// Per graph, per dominance entry: multi-channel f_ij.
    pub forcing: Vec<Vec<ImageBuffer>>,
}

pub fn compute_aux_fields(
    nnfs: &[NNField],
    graphs: &[FeatureGraph],
    features: &Features,
    regions: &RegionSet,
) -> AuxFields {
    let (w, h) = regions.dims();
    let channels = features.channels();
    let mut coverage = Vec::with_capacity(graphs.len());
    let mut forcing = Vec::with_capacity(graphs.len());
    for (j, graph) in graphs.iter().enumerate() {
        coverage.push(coverage_plane(graph, regions));
        let mut per_entry = Vec::with_capacity(graph.dominance.len());
        for (ki, _) in &graph.dominance {
            let mut img = ImageBuffer::new(w, h, channels, 0.0);
            for c in 0..channels {
                let plane = forcing_plane(graph, &nnfs[j], features, regions, *ki, c);
                img.plane_mut(c).copy_from_slice(&plane);
            }
            per_entry.push(img);
        }
        forcing.push(per_entry);
    }
    AuxFields { coverage, forcing }
}

/// The assembled Euler-Lagrange system: masked operator kernels, the
/// right-hand side restricted to the unknowns, and the diagonal.
pub struct LinearSystem<'a> {
    bank: &'a KernelBank,
    policy: BoundaryPolicy,
    width: usize,
    height: usize,
    channels: usize,
    boundary: &'a ImageBuffer,
    unknowns: Vec<(usize, usize)>,
    /// Kernels that participate (nonzero mask), with their mask id.
    active_kernels: Vec<(usize, usize)>,
    masks: Vec<Vec<f64>>,
    rhs: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

/// Forcing choice at assembly: the homogeneous problem or exemplar pulls.
pub enum Forcing<'a> {
    Zero,
    FromMatches(&'a [NNField]),
}

impl<'a> LinearSystem<'a> {
    pub fn assemble(
        bank: &'a KernelBank,
        policy: BoundaryPolicy,
        regions: &RegionSet,
        graphs: &[FeatureGraph],
        features: &Features,
        boundary: &'a ImageBuffer,
        forcing: Forcing,
    ) -> Result<Self> {
        let (w, h) = regions.dims();
        if boundary.dims() != (w, h) {
            return Err(Error::dim_mismatch((w, h), boundary.dims()));
        }
        let channels = boundary.channels();
        let n = w * h;
        let unknowns = regions.inpaint.pixels();
        if unknowns.is_empty() {
            return Err(Error::InvalidParameter(
                "empty inpainting region: nothing to solve".to_string(),
            ));
        }

        let coverage: Vec<Vec<f64>> = graphs
            .iter()
            .map(|g| coverage_plane(g, regions))
            .collect();

        // Group kernels sharing identical dominance structure so the gamma
        // family shares one mask plane.
        let mut masks: Vec<Vec<f64>> = Vec::new();
        let mut mask_keys: Vec<Vec<(usize, &DominanceField)>> = Vec::new();
        let mut active_kernels: Vec<(usize, usize)> = Vec::new();
        for ki in 0..bank.len() {
            let key: Vec<(usize, &DominanceField)> = graphs
                .iter()
                .enumerate()
                .flat_map(|(j, g)| {
                    g.dominance
                        .iter()
                        .filter(move |(k, _)| *k == ki)
                        .map(move |(_, lam)| (j, lam))
                })
                .collect();
            if key.is_empty() {
                continue;
            }
            let mask_id = if let Some(id) = mask_keys.iter().position(|k| *k == key) {
                id
            } else {
                let mut plane = vec![0.0; n];
                for &(j, lam) in &key {
                    let cov = &coverage[j];
                    for y in 0..h {
                        for x in 0..w {
                            let idx = y * w + x;
                            if cov[idx] != 0.0 {
                                plane[idx] += lam.at(x, y) * cov[idx];
                            }
                        }
                    }
                }
                mask_keys.push(key);
                masks.push(plane);
                masks.len() - 1
            };
            if masks[mask_id].iter().any(|&v| v != 0.0) {
                active_kernels.push((ki, mask_id));
            }
        }
        if active_kernels.is_empty() {
            return Err(Error::IllPosed(
                "no filter carries weight anywhere on the extended region".to_string(),
            ));
        }

        well_posedness_guard(bank, &active_kernels, &masks, regions)?;

        let mut system = LinearSystem {
            bank,
            policy,
            width: w,
            height: h,
            channels,
            boundary,
            unknowns,
            active_kernels,
            masks,
            rhs: Vec::new(),
            diag: Vec::new(),
        };

        system.diag = system.compute_diagonal()?;

        // Right-hand side: the forcing pulls, minus the operator applied to
        // the known (Dirichlet) data.
        let m = system.unknowns.len();
        let mut rhs = vec![vec![0.0; m]; channels];
        if let Forcing::FromMatches(nnfs) = forcing {
            if nnfs.len() != graphs.len() {
                return Err(Error::InvalidParameter(
                    "one nearest-neighbor field per graph is required".to_string(),
                ));
            }
            let mut masked = vec![0.0; n];
            let mut pulled = vec![0.0; n];
            for (j, graph) in graphs.iter().enumerate() {
                for (entry_idx, (ki, lam)) in graph.dominance.iter().enumerate() {
                    let _ = entry_idx;
                    for c in 0..channels {
                        let f = forcing_plane(graph, &nnfs[j], features, regions, *ki, c);
                        for y in 0..h {
                            for x in 0..w {
                                let idx = y * w + x;
                                masked[idx] = if regions.filter_extended.get(x, y) {
                                    lam.at(x, y) * f[idx]
                                } else {
                                    0.0
                                };
                            }
                        }
                        convolve_transpose_plane_into(
                            &masked,
                            w,
                            h,
                            &bank.kernels()[*ki],
                            policy,
                            &mut pulled,
                        );
                        for (ui, &(x, y)) in system.unknowns.iter().enumerate() {
                            rhs[c][ui] += pulled[y * w + x];
                        }
                    }
                }
            }
        }
        for c in 0..channels {
            let mut known = boundary.plane(c).to_vec();
            for &(x, y) in &system.unknowns {
                known[y * w + x] = 0.0;
            }
            let a_known = system.apply_plane(&known);
            for (ui, &(x, y)) in system.unknowns.iter().enumerate() {
                rhs[c][ui] -= a_known[y * w + x];
            }
        }
        system.rhs = rhs;
        Ok(system)
    }

    pub fn unknowns(&self) -> &[(usize, usize)] {
        &self.unknowns
    }

    pub fn rhs(&self) -> &[Vec<f64>] {
        &self.rhs
    }

    /// Apply the masked operator sum_i adj(g_i)*(M_i (g_i * plane)) to a
    /// full plane. Deterministic regardless of thread count.
    pub fn apply_plane(&self, plane: &[f64]) -> Vec<f64> {
        let n = self.width * self.height;
        let group = self.active_kernels.len().div_ceil(APPLY_GROUPS).max(1);
        let partials: Vec<Vec<f64>> = self
            .active_kernels
            .par_chunks(group)
            .map(|chunk| {
                let mut local = vec![0.0; n];
                let mut scratch = vec![0.0; n];
                let mut scratch2 = vec![0.0; n];
                for &(ki, mask_id) in chunk {
                    let kernel = &self.bank.kernels()[ki];
                    convolve_plane_into(plane, self.width, self.height, kernel, self.policy, &mut scratch);
                    let mask = &self.masks[mask_id];
                    for idx in 0..n {
                        scratch[idx] *= mask[idx];
                    }
                    convolve_transpose_plane_into(
                        &scratch,
                        self.width,
                        self.height,
                        kernel,
                        self.policy,
                        &mut scratch2,
                    );
                    for idx in 0..n {
                        local[idx] += scratch2[idx];
                    }
                }
                local
            })
            .collect();
        let mut out = vec![0.0; n];
        for p in partials {
            for idx in 0..n {
                out[idx] += p[idx];
            }
        }
        out
    }

    /// Operator restricted to the unknowns.
    fn apply_unknowns(&self, v: &[f64], out: &mut [f64]) {
        let w = self.width;
        let mut plane = vec![0.0; w * self.height];
        for (ui, &(x, y)) in self.unknowns.iter().enumerate() {
            plane[y * w + x] = v[ui];
        }
        let applied = self.apply_plane(&plane);
        for (ui, &(x, y)) in self.unknowns.iter().enumerate() {
            out[ui] = applied[y * w + x];
        }
    }

    /// Diagonal of the restricted operator, for Jacobi preconditioning.
    /// Boundary-fold cross terms are ignored; positivity is still checked.
    fn compute_diagonal(&self) -> Result<Vec<f64>> {
        let (w, h) = (self.width, self.height);
        let mut unknown_of = vec![usize::MAX; w * h];
        for (ui, &(x, y)) in self.unknowns.iter().enumerate() {
            unknown_of[y * w + x] = ui;
        }
        let mut diag = vec![0.0; self.unknowns.len()];
        for &(ki, mask_id) in &self.active_kernels {
            let kernel = &self.bank.kernels()[ki];
            let mask = &self.masks[mask_id];
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let mval = mask[y as usize * w + x as usize];
                    if mval == 0.0 {
                        continue;
                    }
                    for &(dx, dy, c) in kernel.nonzero() {
                        let tx = self.policy.resolve(x - dx as i64, w);
                        let ty = self.policy.resolve(y - dy as i64, h);
                        if let (Some(ix), Some(iy)) = (tx, ty) {
                            let ui = unknown_of[iy * w + ix];
                            if ui != usize::MAX {
                                diag[ui] += c * c * mval;
                            }
                        }
                    }
                }
            }
        }
        if let Some(bad) = diag.iter().position(|&d| d <= 0.0) {
            let (x, y) = self.unknowns[bad];
            return Err(Error::IllPosed(format!(
                "zero diagonal at pixel ({x},{y}); add an identity filter (a Tikhonov term) or dominance mass around it"
            )));
        }
        Ok(diag)
    }
}

/// Reject configurations that leave a connected component of the unknowns
/// with neither a Tikhonov (identity) term nor any stencil reach into the
/// known region: the homogeneous problem is singular there.
fn well_posedness_guard(
    bank: &KernelBank,
    active_kernels: &[(usize, usize)],
    masks: &[Vec<f64>],
    regions: &RegionSet,
) -> Result<()> {
    let has_tikhonov = active_kernels.iter().any(|&(ki, mask_id)| {
        let k = &bank.kernels()[ki];
        k.nonzero().len() == 1
            && k.nonzero()[0].0 == 0
            && k.nonzero()[0].1 == 0
            && masks[mask_id].iter().any(|&v| v > 0.0)
    });
    if has_tikhonov {
        return Ok(());
    }
    // Composed stencil reach of each kernel is twice its half extents.
    let reach = Footprint::union(
        active_kernels
            .iter()
            .map(|&(ki, _)| {
                let k = &bank.kernels()[ki];
                Footprint::rect(2 * k.half_width(), 2 * k.half_height())
            })
            .collect::<Vec<_>>()
            .iter(),
    );
    let o = &regions.inpaint;
    let (w, h) = o.dims();
    let mut seen = RegionMask::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !o.get(x, y) || seen.get(x, y) {
                continue;
            }
            // Flood-fill one component, checking data coupling.
            let mut coupled = false;
            let mut stack = vec![(x, y)];
            seen.set(x, y, true);
            while let Some((cx, cy)) = stack.pop() {
                for &(dx, dy) in reach.offsets() {
                    let px = cx as i64 + dx as i64;
                    let py = cy as i64 + dy as i64;
                    if px < 0 || py < 0 || px as usize >= w || py as usize >= h {
                        continue;
                    }
                    if !o.get(px as usize, py as usize) {
                        coupled = true;
                    }
                }
                for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                    let px = cx as i64 + dx;
                    let py = cy as i64 + dy;
                    if px < 0 || py < 0 || px as usize >= w || py as usize >= h {
                        continue;
                    }
                    let (px, py) = (px as usize, py as usize);
                    if o.get(px, py) && !seen.get(px, py) {
                        seen.set(px, py, true);
                        stack.push((px, py));
                    }
                }
            }
            if !coupled {
                return Err(Error::IllPosed(format!(
                    "the unknown component containing ({x},{y}) has no Dirichlet data within stencil reach and no identity filter"
                )));
            }
        }
    }
    Ok(())
}

/// Outcome of a boundary-value solve.
pub struct SolveOutcome {
    pub image: ImageBuffer,
    pub residual: f64,
    pub iterations: usize,
}

/// Solve the assembled system per channel by preconditioned conjugate
/// gradients to a relative residual of `tol`; `max_iter == 0` selects the
/// default of 10 iterations per unknown.
pub fn solve_bvp(
    system: &LinearSystem,
    tol: f64,
    max_iter: usize,
    initial: Option<&ImageBuffer>,
) -> Result<SolveOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let m = system.unknowns.len();
    let max_iter = if max_iter == 0 { 10 * m } else { max_iter };
    let mut image = system.boundary.clone();
    let mut worst_residual = 0.0f64;
    let mut worst_iters = 0usize;
    for c in 0..system.channels {
        let b = &system.rhs[c];
        let x0: Vec<f64> = match initial {
            Some(init) => system
                .unknowns
                .iter()
                .map(|&(x, y)| init.at(c, x, y))
                .collect(),
            None => vec![0.0; m],
        };
        let (x, residual, iters) = pcg(system, b, &x0, tol, max_iter)?;
        worst_residual = worst_residual.max(residual);
        worst_iters = worst_iters.max(iters);
        for (ui, &(px, py)) in system.unknowns.iter().enumerate() {
            *image.at_mut(c, px, py) = x[ui];
        }
    }
    Ok(SolveOutcome {
        image,
        residual: worst_residual,
        iterations: worst_iters,
    })
}

fn pcg(
    system: &LinearSystem,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let m = b.len();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok((vec![0.0; m], 0.0, 0));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    system.apply_unknowns(&x, &mut r);
    for i in 0..m {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&system.diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; m];
    let target = tol * norm_b;
    let mut res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if res <= target {
        return Ok((x, res / norm_b, 0));
    }
    for it in 1..=max_iter {
        system.apply_unknowns(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::IllPosed(format!(
                "operator lost positive definiteness (p'Ap = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res <= target {
            return Ok((x, res / norm_b, it));
        }
        for i in 0..m {
            z[i] = r[i] / system.diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        residual: res / norm_b,
        iterations: max_iter,
    })
}

/// Analytic image update for identity-only configurations: each unknown is
/// the dominance- and partition-weighted average of its exemplar votes.
pub fn explicit_update_g1(
    nnfs: &[NNField],
    graphs: &[FeatureGraph],
    regions: &RegionSet,
    features: &Features,
) -> Result<ImageBuffer> {
    let bank = features.bank();
    for g in graphs {
        for (ki, lam) in &g.dominance {
            if lam.is_identically_zero() {
                continue;
            }
            let k = &bank.kernels()[*ki];
            if k.nonzero() != [(0, 0, 1.0)] {
                return Err(Error::InvalidParameter(
                    "the explicit update applies only when every weighted filter is the identity"
                        .to_string(),
                ));
            }
        }
    }
    if nnfs.len() != graphs.len() {
        return Err(Error::InvalidParameter(
            "one nearest-neighbor field per graph is required".to_string(),
        ));
    }
    let (w, h) = regions.dims();
    let channels = features.channels();
    let mut out = features.image().clone();
    let mut numerators: Vec<Vec<f64>> = vec![vec![0.0; w * h]; channels];
    let mut denominator = vec![0.0; w * h];
    for (j, graph) in graphs.iter().enumerate() {
        let cov = coverage_plane(graph, regions);
        for (ki, lam) in &graph.dominance {
            for &(x, y) in regions.inpaint.pixels().iter() {
                let idx = y * w + x;
                denominator[idx] += lam.at(x, y) * cov[idx];
            }
            for c in 0..channels {
                let f = forcing_plane(graph, &nnfs[j], features, regions, *ki, c);
                for &(x, y) in regions.inpaint.pixels().iter() {
                    let idx = y * w + x;
                    numerators[c][idx] += lam.at(x, y) * f[idx];
                }
            }
        }
    }
    for &(x, y) in regions.inpaint.pixels().iter() {
        let idx = y * w + x;
        if denominator[idx] <= 0.0 {
            return Err(Error::UncoveredPixel { x, y });
        }
        for c in 0..channels {
            *out.at_mut(c, x, y) = numerators[c][idx] / denominator[idx];
        }
    }
    Ok(out)
}

/// Alternation energy: sum over graphs and extended-region pixels of the
/// partition-weighted patch distance to the current match.
pub fn energy(
    features: &Features,
    graphs: &[FeatureGraph],
    nnfs: &[NNField],
    regions: &RegionSet,
) -> f64 {
    let (w, h) = regions.dims();
    let mut total = 0.0;
    for (j, graph) in graphs.iter().enumerate() {
        let terms: Vec<f64> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut row_sum = 0.0;
                for x in 0..w {
                    if !regions.patch_extended.get(x, y) {
                        continue;
                    }
                    let beta = graph.partition.at(x, y);
                    if beta == 0.0 {
                        continue;
                    }
                    if let Some(e) = nnfs[j].get(x, y) {
                        row_sum += beta * patch_distance(features, graph, (x, y), e.target);
                    }
                }
                row_sum
            })
            .collect();
        total += terms.iter().sum::<f64>();
    }
    total
}

/// Energy using the distances stored in freshly computed fields; equal to
/// `energy` when the fields were built from the same features.
pub fn energy_from_stored(graphs: &[FeatureGraph], nnfs: &[NNField]) -> f64 {
    let mut total = 0.0;
    for (j, graph) in graphs.iter().enumerate() {
        for ((x, y), e) in nnfs[j].computed_pixels() {
            total += graph.partition.at(x, y) * e.distance;
        }
    }
    total
}

/// The image-step objective (up to a constant in the image): for a probe
/// image v, sum over the extended region of
/// `lambda * (k * (g_i*v)^2 - 2 f_ij (g_i*v))`, with the forcing fields
/// frozen at the reference features. Its minimizer over the unknowns is
/// the boundary-value solution; finite-difference probes of stationarity
/// evaluate exactly this.
pub fn image_objective(
    probe: &ImageBuffer,
    regions: &RegionSet,
    graphs: &[FeatureGraph],
    nnfs: &[NNField],
    reference: &Features,
) -> f64 {
    let bank = reference.bank();
    let policy = reference.policy();
    let (w, h) = regions.dims();
    let n = w * h;
    let channels = probe.channels();
    let mut total = 0.0;
    let mut feat = vec![0.0; n];
    for (j, graph) in graphs.iter().enumerate() {
        let cov = coverage_plane(graph, regions);
        for (ki, lam) in &graph.dominance {
            for c in 0..channels {
                convolve_plane_into(probe.plane(c), w, h, &bank.kernels()[*ki], policy, &mut feat);
                let f = forcing_plane(graph, &nnfs[j], reference, regions, *ki, c);
                let mut acc = 0.0;
                for y in 0..h {
                    for x in 0..w {
                        if !regions.filter_extended.get(x, y) {
                            continue;
                        }
                        let idx = y * w + x;
                        let l = lam.at(x, y);
                        if l == 0.0 {
                            continue;
                        }
                        let g = feat[idx];
                        acc += l * (cov[idx] * g * g - 2.0 * f[idx] * g);
                    }
                }
                total += acc;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{self, KernelBank};
    use crate::metric::{PartitionField, PatchSpec};
    use crate::nnf::{compute_nnf_exact, NNEntry};

    fn identity_graph(patch: PatchSpec) -> FeatureGraph {
        FeatureGraph::new(
            patch,
            None,
            vec![(0, DominanceField::Constant(1.0))],
            PartitionField::Constant(1.0),
        )
        .unwrap()
    }

    fn center_mask(w: usize, h: usize, half: usize) -> RegionMask {
        RegionMask::from_fn(w, h, |x, y| {
            x >= w / 2 - half && x < w / 2 + half && y >= h / 2 - half && y < h / 2 + half
        })
    }

    #[test]
    fn coverage_is_one_for_unit_partition() {
        let bank = KernelBank::new(vec![filters::identity()]);
        let patch = PatchSpec::new(5, 5, 2.0).unwrap();
        let mask = center_mask(20, 20, 3);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = identity_graph(patch);
        let cov = coverage_plane(&graph, &regions);
        for (x, y) in regions.filter_extended.pixels() {
            assert!((cov[y * 20 + x] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forcing_is_constant_for_constant_image() {
        let img = ImageBuffer::new(16, 16, 1, 0.7);
        let bank = KernelBank::new(vec![filters::identity()]);
        let patch = PatchSpec::uniform(3, 3).unwrap();
        let mask = center_mask(16, 16, 3);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = identity_graph(patch);
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let nnf = compute_nnf_exact(&feats, &graph, &regions).unwrap();
        let aux = compute_aux_fields(&[nnf], &[graph], &feats, &regions);
        for (x, y) in regions.filter_extended.pixels() {
            assert!((aux.forcing[0][0].at(0, x, y) - 0.7).abs() < 1e-12);
            assert!((aux.coverage[0][y * 16 + x] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aux_fields_match_triple_loop_oracle() {
        // 12x12 step image, 3x3 uniform patch, hand-built field sending
        // every pixel to a fixed target.
        let img = ImageBuffer::from_fn(12, 12, 1, |_, x, _| if x < 6 { 0.1 } else { 0.8 });
        let bank = KernelBank::new(vec![filters::identity()]);
        let patch = PatchSpec::uniform(3, 3).unwrap();
        let mask = center_mask(12, 12, 2);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = identity_graph(patch);
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let mut entries = Vec::new();
        for (x, y) in regions.patch_extended.pixels() {
            // Alternate targets between two known pixels.
            let target = if (x + y) % 2 == 0 { (0, 0) } else { (11, 11) };
            entries.push(((x, y), NNEntry { target, distance: 0.0 }));
        }
        let nnf = NNField::from_entries(12, 12, entries.clone());
        let aux = compute_aux_fields(
            &[nnf],
            std::slice::from_ref(&graph),
            &feats,
            &regions,
        );
        let clampi = |v: i64| v.clamp(0, 11) as usize;
        for (zx, zy) in regions.filter_extended.pixels() {
            let mut want = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sx = clampi(zx as i64 - dx);
                    let sy = clampi(zy as i64 - dy);
                    let target = if regions.patch_extended.get(sx, sy) {
                        entries
                            .iter()
                            .find(|(p, _)| *p == (sx, sy))
                            .map(|(_, e)| e.target)
                            .unwrap()
                    } else {
                        (sx, sy)
                    };
                    want += img.at(0, clampi(target.0 as i64 + dx), clampi(target.1 as i64 + dy))
                        / 9.0;
                }
            }
            let got = aux.forcing[0][0].at(0, zx, zy);
            assert!((got - want).abs() < 1e-12, "({zx},{zy}): {got} vs {want}");
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let img = ImageBuffer::from_fn(14, 13, 1, |_, x, y| ((x * 5 + y * 3) % 9) as f64 / 9.0);
        let bank = KernelBank::new(vec![filters::grad_x(), filters::grad_y()]);
        let patch = PatchSpec::uniform(1, 1).unwrap();
        // Mask touching the frame exercises the boundary folding.
        let mask = RegionMask::from_fn(14, 13, |x, y| x < 5 && y >= 2 && y < 9);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = FeatureGraph::new(
            PatchSpec::uniform(1, 1).unwrap(),
            None,
            vec![
                (0, DominanceField::Constant(1.0)),
                (1, DominanceField::Constant(1.0)),
            ],
            PartitionField::Constant(1.0),
        )
        .unwrap();
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let system = LinearSystem::assemble(
            &bank,
            BoundaryPolicy::Replicate,
            &regions,
            std::slice::from_ref(&graph),
            &feats,
            &img,
            Forcing::Zero,
        )
        .unwrap();
        let m = system.unknowns().len();
        let u: Vec<f64> = (0..m).map(|i| ((i * 7 + 1) % 13) as f64 / 13.0).collect();
        let v: Vec<f64> = (0..m).map(|i| ((i * 11 + 5) % 17) as f64 / 17.0).collect();
        let mut au = vec![0.0; m];
        let mut av = vec![0.0; m];
        system.apply_unknowns(&u, &mut au);
        system.apply_unknowns(&v, &mut av);
        let lhs: f64 = au.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&av).map(|(a, b)| a * b).sum();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn harmonic_solve_reproduces_affine_data() {
        let w = 16;
        let img = ImageBuffer::from_fn(w, w, 1, |_, x, _| x as f64 / (w - 1) as f64);
        let bank = KernelBank::new(vec![filters::grad_x(), filters::grad_y()]);
        let patch = PatchSpec::uniform(1, 1).unwrap();
        let mask = center_mask(w, w, 4);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = FeatureGraph::new(
            patch,
            None,
            vec![
                (0, DominanceField::Constant(1.0)),
                (1, DominanceField::Constant(1.0)),
            ],
            PartitionField::Constant(1.0),
        )
        .unwrap();
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let system = LinearSystem::assemble(
            &bank,
            BoundaryPolicy::Replicate,
            &regions,
            std::slice::from_ref(&graph),
            &feats,
            &img,
            Forcing::Zero,
        )
        .unwrap();
        let out = solve_bvp(&system, 1e-10, 0, None).unwrap();
        for (x, y) in regions.inpaint.pixels() {
            let want = x as f64 / (w - 1) as f64;
            assert!(
                (out.image.at(0, x, y) - want).abs() < 1e-8,
                "({x},{y}): {}",
                out.image.at(0, x, y)
            );
        }
    }

    #[test]
    fn explicit_update_matches_diagonal_solve() {
        let img = ImageBuffer::from_fn(18, 18, 1, |_, x, y| ((x * 3 + y * 7) % 10) as f64 / 10.0);
        let bank = KernelBank::new(vec![filters::identity()]);
        let patch = PatchSpec::new(3, 3, 2.0).unwrap();
        let mask = center_mask(18, 18, 4);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = identity_graph(patch);
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let nnf = compute_nnf_exact(&feats, &graph, &regions).unwrap();
        let graphs = [graph];
        let nnfs = [nnf];
        let explicit = explicit_update_g1(&nnfs, &graphs, &regions, &feats).unwrap();
        let system = LinearSystem::assemble(
            &bank,
            BoundaryPolicy::Replicate,
            &regions,
            &graphs,
            &feats,
            &img,
            Forcing::FromMatches(&nnfs),
        )
        .unwrap();
        let solved = solve_bvp(&system, 1e-12, 0, None).unwrap();
        for (x, y) in regions.inpaint.pixels() {
            assert!(
                (explicit.at(0, x, y) - solved.image.at(0, x, y)).abs() < 1e-8,
                "({x},{y})"
            );
        }
        // Off the unknowns both answers keep the boundary data bit-exactly.
        for (x, y) in regions.inpaint.complement_pixels() {
            assert_eq!(explicit.at(0, x, y), img.at(0, x, y));
            assert_eq!(solved.image.at(0, x, y), img.at(0, x, y));
        }
    }

    #[test]
    fn explicit_update_respects_partition_masking() {
        // Two graphs with complementary constant-field partitions: where a
        // graph has no mass its matches are ignored.
        let img = ImageBuffer::from_fn(16, 16, 1, |_, x, _| if x < 8 { 0.2 } else { 0.9 });
        let bank = KernelBank::new(vec![filters::identity()]);
        let patch = PatchSpec::uniform(1, 1).unwrap();
        let mask = center_mask(16, 16, 2);
        let regions = RegionSet::derive(mask.clone(), &bank.supports(), &patch.footprint()).unwrap();
        let (w, h) = (16, 16);
        let left = PartitionField::Field {
            width: w,
            height: h,
            values: (0..w * h)
                .map(|i| if i % w < 8 { 1.0 } else { 0.0 })
                .collect(),
        };
        let right = PartitionField::Field {
            width: w,
            height: h,
            values: (0..w * h)
                .map(|i| if i % w < 8 { 0.0 } else { 1.0 })
                .collect(),
        };
        let mk = |p: PartitionField| {
            FeatureGraph::new(
                PatchSpec::uniform(1, 1).unwrap(),
                None,
                vec![(0, DominanceField::Constant(1.0))],
                p,
            )
            .unwrap()
        };
        let graphs = [mk(left), mk(right)];
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let nnfs = [
            compute_nnf_exact(&feats, &graphs[0], &regions).unwrap(),
            compute_nnf_exact(&feats, &graphs[1], &regions).unwrap(),
        ];
        let out = explicit_update_g1(&nnfs, &graphs, &regions, &feats).unwrap();
        // With a 1x1 patch each unknown copies its own graph's match value.
        for (x, y) in regions.inpaint.pixels() {
            let want = if x < 8 { 0.2 } else { 0.9 };
            assert!((out.at(0, x, y) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_examples() {
        let img = ImageBuffer::new(14, 14, 1, 0.5);
        let bank = KernelBank::new(vec![filters::identity()]);
        let patch = PatchSpec::uniform(3, 3).unwrap();
        let mask = center_mask(14, 14, 3);
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = identity_graph(patch);
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let nnf = compute_nnf_exact(&feats, &graph, &regions).unwrap();
        let graphs = [graph];
        let nnfs = [nnf];
        assert_eq!(energy(&feats, &graphs, &nnfs, &regions), 0.0);
        assert_eq!(energy_from_stored(&graphs, &nnfs), 0.0);

        let textured = ImageBuffer::from_fn(14, 14, 1, |_, x, y| ((x * y) % 5) as f64 / 5.0);
        let tf = Features::compute(&textured, &bank, BoundaryPolicy::Replicate);
        let tn = compute_nnf_exact(&tf, &graphs[0], &regions).unwrap();
        let tnn = [tn];
        let full = energy(&tf, &graphs, &tnn, &regions);
        let stored = energy_from_stored(&graphs, &tnn);
        assert!((full - stored).abs() <= 1e-12 * full.max(1.0));
    }

    #[test]
    fn guard_rejects_isolated_component_without_tikhonov() {
        let img = ImageBuffer::new(8, 8, 1, 0.5);
        let bank = KernelBank::new(vec![filters::grad_x(), filters::grad_y()]);
        let patch = PatchSpec::uniform(1, 1).unwrap();
        let mask = RegionMask::new(8, 8, true); // whole image unknown
        let regions = RegionSet::derive(mask, &bank.supports(), &patch.footprint()).unwrap();
        let graph = FeatureGraph::new(
            patch,
            None,
            vec![
                (0, DominanceField::Constant(1.0)),
                (1, DominanceField::Constant(1.0)),
            ],
            PartitionField::Constant(1.0),
        )
        .unwrap();
        let feats = Features::compute(&img, &bank, BoundaryPolicy::Replicate);
        let err = LinearSystem::assemble(
            &bank,
            BoundaryPolicy::Replicate,
            &regions,
            std::slice::from_ref(&graph),
            &feats,
            &img,
            Forcing::Zero,
        );
        assert!(matches!(err, Err(Error::IllPosed(_))));
    }
}
