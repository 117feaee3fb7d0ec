//! Characteristic tracing on solved fields and distance belts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band::{NarrowBand, STENCIL_RADIUS_CELLS};
use crate::geometry::{b_tensor, ClosestPointMap, ClosestPointRecord, GeometryError, Point3, Vec3};
use crate::hamiltonian::{speed, HamiltonianModel, SpeedModel};
use crate::solver_sweep::SolutionField;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("point {0:?} is outside the band")]
    LeftBand([f64; 3]),
    #[error("path stagnated at {at:?} after {step} steps")]
    StagnatedPath { step: usize, at: [f64; 3] },
    #[error("field has no stored controls; solve with an anisotropic speed")]
    MissingControls,
    #[error("cloud point {0:?} is outside the band")]
    PointOutsideBand([f64; 3]),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedTarget,
    MaxSteps,
    LeftBand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfacePath {
    /// Vertices projected onto Γ.
    pub vertices: Vec<Point3>,
    /// Cumulative arc length at each vertex.
    pub arc: Vec<f64>,
    /// Accumulated running cost `∫ r / f ds`.
    pub cost: f64,
    pub terminated: Termination,
}

impl SurfacePath {
    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }

    /// Point at arc length `s`, linearly interpolated.
    pub fn at_arc(&self, s: f64) -> Point3 {
        let k = self.arc.partition_point(|&a| a < s);
        if k == 0 {
            return self.vertices[0];
        }
        if k >= self.arc.len() {
            return *self.vertices.last().unwrap();
        }
        let (a0, a1) = (self.arc[k - 1], self.arc[k]);
        let t = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        self.vertices[k - 1] + t * (self.vertices[k] - self.vertices[k - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    /// Integration step; `None` means `h / 2`.
    pub step: Option<f64>,
    pub max_steps: usize,
    /// Distance to a target closest point that ends the trace; `None` means `2h`.
    pub target_tol: Option<f64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            step: None,
            max_steps: 20_000,
            target_tol: None,
        }
    }
}

/// Hausdorff distance between two polylines, measured on their vertices.
pub fn hausdorff(a: &[Point3], b: &[Point3]) -> f64 {
    let one_way = |p: &[Point3], q: &[Point3]| {
        p.iter()
            .map(|x| {
                q.windows(2)
                    .map(|w| segment_distance(x, &w[0], &w[1]))
                    .fold(
                        if q.len() == 1 {
                            (x - q[0]).norm()
                        } else {
                            f64::INFINITY
                        },
                        f64::min,
                    )
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn segment_distance(x: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((x - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - (a + t * ab)).norm()
}

struct Tracer<'a, M: ClosestPointMap + ?Sized> {
    band: &'a NarrowBand,
    surface: &'a M,
    field: &'a SolutionField,
    model: &'a HamiltonianModel,
    targets: Vec<Point3>,
    eta: f64,
    step: f64,
    target_tol: f64,
    max_steps: usize,
}

enum Direction {
    Move(Vec3, f64),
    Outside,
    Flat,
}

impl<'a, M: ClosestPointMap + ?Sized> Tracer<'a, M> {
    fn new(
        band: &'a NarrowBand,
        surface: &'a M,
        field: &'a SolutionField,
        model: &'a HamiltonianModel,
        cfg: &PathConfig,
    ) -> Self {
        let h = band.h();
        let targets = band
            .targets()
            .iter()
            .map(|&(s, _)| band.nodes()[s].rec.cp)
            .collect();
        Tracer {
            band,
            surface,
            field,
            model,
            targets,
            eta: 0.0,
            step: cfg.step.unwrap_or(0.5 * h),
            target_tol: cfg.target_tol.unwrap_or(2.0 * h),
            max_steps: cfg.max_steps,
        }
    }

    fn near_target(&self, cp: &Point3) -> bool {
        self.targets
            .iter()
            .any(|t| (t - cp).norm() <= self.target_tol)
    }

    /// Point on the parallel surface of the start through the closest point of `y`.
    fn reproject(&self, y: &Point3) -> Result<ClosestPointRecord, PathError> {
        let rec = self.surface.closest_point(y)?;
        Ok(rec)
    }

    fn lift(&self, rec: &ClosestPointRecord) -> Point3 {
        rec.cp + self.eta * rec.n
    }

    fn gradient(&self, y: &Point3) -> Option<Vec3> {
        let d = 0.5 * self.band.h();
        let mut g = Vec3::zeros();
        for axis in 0..3 {
            let mut e = Vec3::zeros();
            e[axis] = d;
            let hi = self.band.interpolate(&self.field.values, &(y + e))?;
            let lo = self.band.interpolate(&self.field.values, &(y - e))?;
            g[axis] = (hi - lo) / (2.0 * d);
        }
        Some(g)
    }

    /// Tangential part of `B∇v` on the normal line through `y`.
    ///
    /// `B∇v` does not change along normals, so when the interpolation
    /// stencils around `y` stick out of the band the gradient is taken at
    /// shallower points of the same line instead.
    fn descent(&self, y: &Point3, rec: &ClosestPointRecord) -> Result<Option<Vec3>, PathError> {
        let h = self.band.h();
        let shallow = (self.band.eps() - STENCIL_RADIUS_CELLS * h - 0.5 * h).max(0.0);
        let depths = [rec.dist, rec.dist.clamp(-shallow, shallow), 0.0];
        for (k, &d) in depths.iter().enumerate() {
            if k > 0 && d == depths[k - 1] {
                continue;
            }
            let (p, prec) = if k == 0 {
                (*y, *rec)
            } else {
                let p = rec.cp + d * rec.n;
                (p, self.surface.closest_point(&p)?)
            };
            if let Some(g) = self.gradient(&p) {
                let bg = b_tensor(&prec, self.model.mu)? * g;
                return Ok(Some(bg - bg.dot(&prec.n) * prec.n));
            }
        }
        Ok(None)
    }

    /// Interpolated stored control at `y`, as a frame angle at `rec`.
    fn control(&self, y: &Point3, rec: &ClosestPointRecord) -> Option<Vec3> {
        let controls = self.field.argmin_control.as_ref()?;
        let grid = self.band.grid();
        let q = (y - grid.origin) / grid.h;
        let base = [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64];
        let mut acc = 0.0;
        let mut wsum = 0.0;
        let mut reference: Option<f64> = None;
        for c in 0..8 {
            let idx = [
                base[0] + (c & 1) as i64,
                base[1] + ((c >> 1) & 1) as i64,
                base[2] + ((c >> 2) & 1) as i64,
            ];
            let Some(slot) = self.band.slot_of(idx) else {
                continue;
            };
            if slot >= self.band.band_len() {
                continue;
            }
            let a = controls[slot];
            let (c1, c2) = (a.dot(&rec.t1), a.dot(&rec.t2));
            if c1 * c1 + c2 * c2 < 1e-12 {
                continue;
            }
            let mut theta = c2.atan2(c1);
            match reference {
                None => reference = Some(theta),
                Some(r) => {
                    while theta - r > PI {
                        theta -= 2.0 * PI;
                    }
                    while theta - r < -PI {
                        theta += 2.0 * PI;
                    }
                }
            }
            let dist = (self.band.point(slot) - y).norm();
            let w = 1.0 / (dist + 1e-9 * grid.h);
            acc += w * theta;
            wsum += w;
        }
        if wsum == 0.0 {
            return None;
        }
        let theta = acc / wsum;
        Some(theta.cos() * rec.t1 + theta.sin() * rec.t2)
    }

    /// Velocity direction `B a` (unit on Γ) and the speed `f` along it.
    fn direction(&self, y: &Point3, anisotropic: bool) -> Result<Direction, PathError> {
        let rec = self.reproject(y)?;
        if rec.dist.abs() >= self.band.eps() {
            return Ok(Direction::Outside);
        }
        let b = b_tensor(&rec, self.model.mu)?;
        let a = if anisotropic {
            match self.control(y, &rec) {
                Some(a) => a,
                None => return Ok(Direction::Outside),
            }
        } else {
            let Some(tangent) = self.descent(y, &rec)? else {
                return Ok(Direction::Outside);
            };
            let norm = tangent.norm();
            if norm < 1e-12 {
                return Ok(Direction::Flat);
            }
            -tangent / norm
        };
        let f = speed(&self.model.speed, &rec, &a);
        Ok(Direction::Move(b * a, f))
    }

    fn trace(&mut self, start: &Point3, anisotropic: bool) -> Result<SurfacePath, PathError> {
        let rec0 = self.surface.closest_point(start)?;
        if rec0.dist.abs() >= self.band.eps() {
            return Err(PathError::LeftBand([start.x, start.y, start.z]));
        }
        self.eta = rec0.dist;
        let mut y = self.lift(&rec0);
        let mut vertices = vec![rec0.cp];
        let mut arc = vec![0.0];
        let mut cost = 0.0;
        if self.near_target(&rec0.cp) {
            return Ok(SurfacePath {
                vertices,
                arc,
                cost,
                terminated: Termination::ReachedTarget,
            });
        }
        let dt = self.step;
        let mut terminated = Termination::MaxSteps;
        for step in 0..self.max_steps {
            let (k1, f1) = match self.direction(&y, anisotropic)? {
                Direction::Move(v, f) => (v, f),
                Direction::Outside => {
                    terminated = Termination::LeftBand;
                    break;
                }
                Direction::Flat => {
                    return Err(PathError::StagnatedPath {
                        step,
                        at: [y.x, y.y, y.z],
                    })
                }
            };
            let y1 = self.lift(&self.reproject(&(y + dt * k1))?);
            let (k2, f2) = match self.direction(&y1, anisotropic)? {
                Direction::Move(v, f) => (v, f),
                Direction::Outside => {
                    terminated = Termination::LeftBand;
                    break;
                }
                Direction::Flat => {
                    return Err(PathError::StagnatedPath {
                        step,
                        at: [y.x, y.y, y.z],
                    })
                }
            };
            let rec = self.reproject(&(y + 0.5 * dt * (k1 + k2)))?;
            let prev = *vertices.last().unwrap();
            let moved = (rec.cp - prev).norm();
            if moved < 1e-3 * self.band.h() {
                return Err(PathError::StagnatedPath {
                    step,
                    at: [y.x, y.y, y.z],
                });
            }
            let r = self.model.cost.r.eval(&rec.cp);
            cost += r * moved * 0.5 * (1.0 / f1 + 1.0 / f2);
            y = self.lift(&rec);
            vertices.push(rec.cp);
            arc.push(arc.last().unwrap() + moved);
            if self.near_target(&rec.cp) {
                terminated = Termination::ReachedTarget;
                break;
            }
        }
        Ok(SurfacePath {
            vertices,
            arc,
            cost,
            terminated,
        })
    }
}

/// Descend the solved field from `start` along `-B∇v / |B∇v|`.
///
/// Starts off Γ move on their parallel surface; vertices are recorded at
/// their closest points.
pub fn trace_isotropic<M: ClosestPointMap + ?Sized>(
    band: &NarrowBand,
    surface: &M,
    field: &SolutionField,
    model: &HamiltonianModel,
    start: &Point3,
    cfg: &PathConfig,
) -> Result<SurfacePath, PathError> {
    Tracer::new(band, surface, field, model, cfg).trace(start, false)
}

/// Replay the minimizing controls stored by an anisotropic solve.
pub fn trace_anisotropic<M: ClosestPointMap + ?Sized>(
    band: &NarrowBand,
    surface: &M,
    field: &SolutionField,
    model: &HamiltonianModel,
    start: &Point3,
    cfg: &PathConfig,
) -> Result<SurfacePath, PathError> {
    if field.argmin_control.is_none() {
        return Err(PathError::MissingControls);
    }
    if let SpeedModel::Isotropic(_) = model.speed {
        log::warn!("replaying stored controls with an isotropic speed model");
    }
    Tracer::new(band, surface, field, model, cfg).trace(start, true)
}

/// Interval index of each point's interpolated value, or `None` when no
/// interval contains it. Empty intervals (`lo >= hi`) never match.
pub fn belt_sort(
    band: &NarrowBand,
    values: &[f64],
    points: &[Point3],
    intervals: &[(f64, f64)],
) -> Result<Vec<Option<usize>>, PathError> {
    points
        .iter()
        .map(|p| {
            let v = band
                .interpolate(values, p)
                .ok_or(PathError::PointOutsideBand([p.x, p.y, p.z]))?;
            Ok(intervals
                .iter()
                .position(|&(lo, hi)| lo < hi && lo <= v && v <= hi))
        })
        .collect()
}
