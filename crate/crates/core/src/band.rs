//! Cartesian narrow band around a surface, ghost-node closure and target sets.
//!
//! Band nodes are grid nodes with `|d| < eps`. Finite-difference stencils of
//! band nodes that leave the band land on ghost nodes; a ghost takes the
//! tricubic interpolant of band values at its projection `cp + depth * n`
//! back inside the band, which keeps the solution constant along normals.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{ClosestPointMap, ClosestPointRecord, GeometryError, Point3};

/// `2 sqrt(3)`: reach of a 4³ interpolation stencil in units of `h`.
pub const STENCIL_RADIUS_CELLS: f64 = 3.464_101_615_137_754_6;

/// Default radius, in units of `h`, of the node set fixed around a point
/// source by [`NarrowBand::discretize_target`].
pub const DEFAULT_TARGET_RADIUS_CELLS: f64 = 4.0;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandError {
    #[error("band half-width {eps} is too thin; it must exceed 2*sqrt(3)*h = {min}")]
    BandTooThin { eps: f64, min: f64 },
    #[error("band half-width {eps} is too thick; it must stay below 1/max curvature = {bound}")]
    BandTooThick { eps: f64, bound: f64 },
    #[error("interpolation stencil of ghost node {0:?} leaves the band")]
    StencilEscapesBand([i32; 3]),
    #[error("no band node lies within the target radius")]
    EmptyTarget,
    #[error("grid does not cover the band: node {0:?} is outside the grid")]
    GridTooSmall([i64; 3]),
    #[error("ghost node {index:?}: {source}")]
    GhostGeometry {
        index: [i32; 3],
        source: GeometryError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    pub origin: Point3,
    pub h: f64,
    pub dims: [usize; 3],
}

impl CartesianGrid {
    pub fn new(origin: Point3, h: f64, dims: [usize; 3]) -> Self {
        assert!(h > 0.0, "grid spacing must be positive");
        CartesianGrid { origin, h, dims }
    }

    /// `n³` nodes covering `[0,1]³` with `h = 1/(n-1)`.
    pub fn unit_cube(n: usize) -> Self {
        CartesianGrid::new(Point3::zeros(), 1.0 / (n - 1) as f64, [n, n, n])
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn contains(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|a| idx[a] >= 0 && (idx[a] as usize) < self.dims[a])
    }

    pub fn linear(&self, idx: [i64; 3]) -> usize {
        (idx[0] as usize * self.dims[1] + idx[1] as usize) * self.dims[2] + idx[2] as usize
    }

    pub fn unlinear(&self, lin: usize) -> [i64; 3] {
        let k = lin % self.dims[2];
        let ij = lin / self.dims[2];
        [
            (ij / self.dims[1]) as i64,
            (ij % self.dims[1]) as i64,
            k as i64,
        ]
    }

    pub fn point(&self, idx: [i64; 3]) -> Point3 {
        self.origin + Point3::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    Target,
    Ghost,
}

impl NodeClass {
    pub fn label(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Target => "target",
            NodeClass::Ghost => "ghost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandNode {
    pub index: [i32; 3],
    pub rec: ClosestPointRecord,
    pub class: NodeClass,
}

/// Interpolation data for one ghost node.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostClosure {
    pub ghost: usize,
    pub point: Point3,
    pub stencil: [u32; 64],
    pub weights: [f64; 64],
}

/// Where along its normal a ghost node is projected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GhostDepth {
    /// `|d| = eps - 2 sqrt(3) h`, the deepest point whose stencil still fits.
    BandEdge,
    /// Signed depth in world units, measured on the ghost's side of Γ.
    Signed(f64),
}

#[derive(Debug, Clone)]
pub struct NarrowBand {
    grid: CartesianGrid,
    eps: f64,
    reach: usize,
    nodes: Vec<BandNode>,
    band_len: usize,
    slots: Vec<u32>,
    neighbors: Vec<u32>,
    closures: Vec<GhostClosure>,
    targets: Vec<(usize, f64)>,
    max_curvature: f64,
    pencils: Vec<(usize, usize)>,
    planes: Vec<(usize, usize)>,
}

/// Tensor-product cubic Lagrange weights on nodes `-1, 0, 1, 2`.
pub fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

impl NarrowBand {
    /// Extract `{|d| < eps}` and the ghost layer needed by stencils that
    /// reach `reach` nodes along each axis, then build ghost closures at the
    /// band-edge depth.
    pub fn build<M: ClosestPointMap + ?Sized>(
        grid: CartesianGrid,
        surface: &M,
        eps: f64,
        reach: usize,
    ) -> Result<Self, BandError> {
        let mut band = Self::classify(grid, surface, eps, reach)?;
        let closures = band.build_ghost_closures(GhostDepth::BandEdge)?;
        band.closures = closures;
        Ok(band)
    }

    /// Band extraction and ghost identification without closures.
    pub fn classify<M: ClosestPointMap + ?Sized>(
        grid: CartesianGrid,
        surface: &M,
        eps: f64,
        reach: usize,
    ) -> Result<Self, BandError> {
        let h = grid.h;
        let min = STENCIL_RADIUS_CELLS * h;
        if !(eps > min) {
            return Err(BandError::BandTooThin { eps, min });
        }
        let keep = eps + reach as f64 * h * (1.0 + 1e-9);
        let skip = surface.coarse_distance_hint();
        let candidates: Vec<(usize, Point3)> = (0..grid.node_count())
            .into_par_iter()
            .filter_map(|lin| {
                let p = grid.point(grid.unlinear(lin));
                match skip {
                    Some(margin) => match surface.coarse_distance(&p) {
                        Some(d) if d > keep + margin => None,
                        _ => Some((lin, p)),
                    },
                    None => Some((lin, p)),
                }
            })
            .collect();
        let points: Vec<Point3> = candidates.iter().map(|c| c.1).collect();
        let recs = surface.closest_points(&points);
        let mut kept: Vec<(usize, ClosestPointRecord)> = candidates
            .iter()
            .zip(recs)
            .filter_map(|(&(lin, _), r)| match r {
                Ok(rec) if rec.dist.abs() < keep => Some((lin, rec)),
                _ => None,
            })
            .collect();
        kept.sort_by_key(|k| k.0);

        let mut slots = vec![NONE; grid.node_count()];
        let mut in_band: Vec<(usize, ClosestPointRecord)> = Vec::new();
        let mut near: Vec<(usize, ClosestPointRecord)> = Vec::new();
        for (lin, rec) in kept {
            if rec.dist.abs() < eps {
                in_band.push((lin, rec));
            } else {
                near.push((lin, rec));
            }
        }

        let mut max_curvature: f64 = 0.0;
        for (_, rec) in &in_band {
            if !(rec.sigma1 > 0.0 && rec.sigma2 > 0.0) {
                return Err(BandError::BandTooThick {
                    eps,
                    bound: rec.dist.abs(),
                });
            }
            let (k1, k2) = rec.surface_curvatures();
            max_curvature = max_curvature.max(k1.abs()).max(k2.abs());
        }
        if max_curvature > 0.0 && eps * max_curvature >= 1.0 {
            return Err(BandError::BandTooThick {
                eps,
                bound: 1.0 / max_curvature,
            });
        }

        let mut nodes: Vec<BandNode> = in_band
            .iter()
            .map(|&(lin, rec)| {
                let idx = grid.unlinear(lin);
                BandNode {
                    index: [idx[0] as i32, idx[1] as i32, idx[2] as i32],
                    rec,
                    class: NodeClass::Interior,
                }
            })
            .collect();
        for (s, &(lin, _)) in in_band.iter().enumerate() {
            slots[lin] = s as u32;
        }
        let band_len = nodes.len();
        let near_lookup: std::collections::HashMap<usize, ClosestPointRecord> =
            near.into_iter().collect();

        let mut neighbors = vec![NONE; band_len * 6 * reach];
        for s in 0..band_len {
            let base = nodes[s].index;
            for axis in 0..3 {
                for (side, dir) in [(0usize, -1i64), (1, 1)] {
                    for step in 1..=reach {
                        let mut idx = [base[0] as i64, base[1] as i64, base[2] as i64];
                        idx[axis] += dir * step as i64;
                        if !grid.contains(idx) {
                            return Err(BandError::GridTooSmall(idx));
                        }
                        let lin = grid.linear(idx);
                        if slots[lin] == NONE {
                            let rec = match near_lookup.get(&lin) {
                                Some(r) => *r,
                                None => {
                                    let p = grid.point(idx);
                                    surface.closest_point(&p).map_err(|source| {
                                        BandError::GhostGeometry {
                                            index: [idx[0] as i32, idx[1] as i32, idx[2] as i32],
                                            source,
                                        }
                                    })?
                                }
                            };
                            slots[lin] = nodes.len() as u32;
                            nodes.push(BandNode {
                                index: [idx[0] as i32, idx[1] as i32, idx[2] as i32],
                                rec,
                                class: NodeClass::Ghost,
                            });
                        }
                        neighbors[Self::nbr_pos(reach, s, axis, side, step)] = slots[lin];
                    }
                }
            }
        }

        let mut pencils = Vec::new();
        let mut planes = Vec::new();
        let mut start = 0;
        for s in 1..=band_len {
            if s == band_len || nodes[s].index[..2] != nodes[start].index[..2] {
                pencils.push((start, s));
                start = s;
            }
        }
        let mut pstart = 0;
        for p in 1..=pencils.len() {
            if p == pencils.len()
                || nodes[pencils[p].0].index[0] != nodes[pencils[pstart].0].index[0]
            {
                planes.push((pstart, p));
                pstart = p;
            }
        }

        Ok(NarrowBand {
            grid,
            eps,
            reach,
            nodes,
            band_len,
            slots,
            neighbors,
            closures: Vec::new(),
            targets: Vec::new(),
            max_curvature,
            pencils,
            planes,
        })
    }

    #[inline]
    fn nbr_pos(reach: usize, slot: usize, axis: usize, side: usize, step: usize) -> usize {
        ((slot * 3 + axis) * 2 + side) * reach + (step - 1)
    }

    /// Slot of the node `step` cells from band node `slot` along `axis`;
    /// `side` 0 is the negative direction.
    #[inline]
    pub fn neighbor(&self, slot: usize, axis: usize, side: usize, step: usize) -> usize {
        self.neighbors[Self::nbr_pos(self.reach, slot, axis, side, step)] as usize
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Band nodes (interior and target) followed by ghosts.
    pub fn nodes(&self) -> &[BandNode] {
        &self.nodes
    }

    pub fn band_nodes(&self) -> &[BandNode] {
        &self.nodes[..self.band_len]
    }

    pub fn band_len(&self) -> usize {
        self.band_len
    }

    pub fn ghost_len(&self) -> usize {
        self.nodes.len() - self.band_len
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn closures(&self) -> &[GhostClosure] {
        &self.closures
    }

    pub fn targets(&self) -> &[(usize, f64)] {
        &self.targets
    }

    /// Largest absolute surface curvature seen over the band.
    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }

    /// Runs of band slots sharing `(i, j)`, in lexicographic order.
    pub fn pencils(&self) -> &[(usize, usize)] {
        &self.pencils
    }

    /// Runs of pencils sharing `i`.
    pub fn planes(&self) -> &[(usize, usize)] {
        &self.planes
    }

    pub fn slot_of(&self, idx: [i64; 3]) -> Option<usize> {
        if !self.grid.contains(idx) {
            return None;
        }
        match self.slots[self.grid.linear(idx)] {
            NONE => None,
            s => Some(s as usize),
        }
    }

    pub fn point(&self, slot: usize) -> Point3 {
        let i = self.nodes[slot].index;
        self.grid.point([i[0] as i64, i[1] as i64, i[2] as i64])
    }

    /// Projection depth of each ghost for the given choice.
    pub fn ghost_depth(&self, depth: GhostDepth) -> f64 {
        match depth {
            GhostDepth::BandEdge => self.eps - STENCIL_RADIUS_CELLS * self.grid.h,
            GhostDepth::Signed(d) => d,
        }
    }

    /// Stencil base index and per-axis weights of the tricubic interpolant at `p`.
    fn tricubic_setup(&self, p: &Point3) -> ([i64; 3], [[f64; 4]; 3]) {
        let q = (p - self.grid.origin) / self.grid.h;
        let mut base = [0i64; 3];
        let mut w = [[0.0; 4]; 3];
        for a in 0..3 {
            let f = q[a].floor();
            base[a] = f as i64 - 1;
            w[a] = cubic_weights(q[a] - f);
        }
        (base, w)
    }

    /// Slots and weights of the tricubic stencil at `p`; `accept` decides
    /// which slots may take part.
    fn tricubic_stencil(
        &self,
        p: &Point3,
        accept: impl Fn(usize) -> bool,
    ) -> Option<([u32; 64], [f64; 64])> {
        let (base, w) = self.tricubic_setup(p);
        let mut stencil = [0u32; 64];
        let mut weights = [0.0; 64];
        let mut n = 0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let idx = [base[0] + a as i64, base[1] + b as i64, base[2] + c as i64];
                    let slot = self.slot_of(idx)?;
                    if !accept(slot) {
                        return None;
                    }
                    stencil[n] = slot as u32;
                    weights[n] = w[0][a] * w[1][b] * w[2][c];
                    n += 1;
                }
            }
        }
        Some((stencil, weights))
    }

    /// Closure data for every ghost, projecting each to `cp + sgn(d) depth n`.
    pub fn build_ghost_closures(&self, depth: GhostDepth) -> Result<Vec<GhostClosure>, BandError> {
        let delta = self.ghost_depth(depth);
        let band_len = self.band_len;
        (band_len..self.nodes.len())
            .into_par_iter()
            .map(|g| {
                let node = &self.nodes[g];
                let side = if node.rec.dist < 0.0 { -1.0 } else { 1.0 };
                let point = node.rec.cp + side * delta * node.rec.n;
                let (stencil, weights) = self
                    .tricubic_stencil(&point, |s| s < band_len)
                    .ok_or(BandError::StencilEscapesBand(node.index))?;
                Ok(GhostClosure {
                    ghost: g,
                    point,
                    stencil,
                    weights,
                })
            })
            .collect()
    }

    pub fn set_ghost_closures(&mut self, closures: Vec<GhostClosure>) {
        self.closures = closures;
    }

    /// Rebuild closures for a different projection depth.
    pub fn with_ghost_depth(mut self, depth: GhostDepth) -> Result<Self, BandError> {
        self.closures = self.build_ghost_closures(depth)?;
        Ok(self)
    }

    /// Overwrite ghost entries of `values` by interpolating band values.
    pub fn refresh_ghosts(&self, values: &mut [f64]) {
        let fresh: Vec<f64> = self
            .closures
            .par_iter()
            .map(|c| {
                c.stencil
                    .iter()
                    .zip(&c.weights)
                    .map(|(&s, &w)| w * values[s as usize])
                    .sum()
            })
            .collect();
        for (c, v) in self.closures.iter().zip(fresh) {
            values[c.ghost] = v;
        }
    }

    /// Tricubic interpolation of nodal `values` (band and ghost) at `p`.
    pub fn interpolate(&self, values: &[f64], p: &Point3) -> Option<f64> {
        let (base, w) = self.tricubic_setup(p);
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let wab = w[0][a] * w[1][b];
                for (c, wc) in w[2].iter().enumerate() {
                    let idx = [base[0] + a as i64, base[1] + b as i64, base[2] + c as i64];
                    let slot = self.slot_of(idx)?;
                    acc += wab * wc * values[slot];
                }
            }
        }
        Some(acc)
    }

    /// Mark band nodes whose closest point lies within `radius` of a source
    /// and fix their values to `g(cp)` plus the chord distance to the source.
    pub fn discretize_target<M, G>(
        &mut self,
        surface: &M,
        sources: &[Point3],
        radius: f64,
        g: G,
    ) -> Result<(), BandError>
    where
        M: ClosestPointMap + ?Sized,
        G: Fn(&Point3) -> f64,
    {
        let mut on_surface = Vec::with_capacity(sources.len());
        for s in sources {
            let rec = surface.closest_point(s)?;
            if rec.dist.abs() > 1e-9 {
                log::warn!(
                    "target {:?} is {:.3e} off the surface; using its closest point",
                    s,
                    rec.dist
                );
            }
            on_surface.push(rec.cp);
        }
        for node in &mut self.nodes[..self.band_len] {
            if node.class == NodeClass::Target {
                node.class = NodeClass::Interior;
            }
        }
        let mut targets = Vec::new();
        for (slot, node) in self.nodes[..self.band_len].iter_mut().enumerate() {
            let chord = on_surface
                .iter()
                .map(|x| (node.rec.cp - x).norm())
                .fold(f64::INFINITY, f64::min);
            if chord <= radius {
                node.class = NodeClass::Target;
                targets.push((slot, g(&node.rec.cp) + chord));
            }
        }
        if targets.is_empty() {
            self.targets.clear();
            return Err(BandError::EmptyTarget);
        }
        self.targets = targets;
        Ok(())
    }

    /// Diagnostic dump: `i,j,k,class,d,sigma1,sigma2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,k,class,d,sigma1,sigma2")?;
        for n in &self.nodes {
            writeln!(
                w,
                "{},{},{},{},{:.12e},{:.12e},{:.12e}",
                n.index[0],
                n.index[1],
                n.index[2],
                n.class.label(),
                n.rec.dist,
                n.rec.sigma1,
                n.rec.sigma2
            )?;
        }
        Ok(())
    }
}
