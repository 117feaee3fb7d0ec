//! Closest-point data estimated from a finite sample of a closed surface.
//!
//! For a query point `z` the k nearest samples are fitted with a biquadratic
//! height function over their principal-component plane, and Newton's method
//! finds the closest point of `z` on that local patch. The Jacobian of the
//! resulting map is estimated with fourth-order central differences and its
//! SVD yields the frame and singular values of the record.

use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{ClosestPointMap, ClosestPointRecord, GeometryError, Point3, Vec3};
use crate::spatial::KdTree;

pub const MIN_CLOUD_POINTS: usize = 16;
pub const DEFAULT_NEIGHBORS: usize = 12;
pub const FALLBACK_NEIGHBORS: usize = 24;
pub const NEWTON_MAX_ITER: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("point cloud has {0} points; at least {MIN_CLOUD_POINTS} are required")]
    TooFewPoints(usize),
    #[error("points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("a quadric patch needs at least 6 neighbours, got {0}")]
    TooFewNeighbors(usize),
    #[error("neighbourhood of {0:?} is degenerate (collinear samples)")]
    DegenerateNeighborhood([f64; 3]),
    #[error("Newton iteration for the patch closest point did not converge")]
    NewtonDiverged,
    #[error("query point is {distance} from the cloud, beyond the supported reach {reach}")]
    OutOfReach { distance: f64, reach: f64 },
    #[error("finite-difference Jacobian is degenerate at {0:?}")]
    DegenerateJacobian([f64; 3]),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CloudError {
    fn from(e: std::io::Error) -> Self {
        CloudError::Io(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct PointCloud {
    tree: KdTree,
    mean_spacing: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self, CloudError> {
        if points.len() < MIN_CLOUD_POINTS {
            return Err(CloudError::TooFewPoints(points.len()));
        }
        let tree = KdTree::new(points);
        let spacings: Vec<Result<f64, CloudError>> = (0..tree.len())
            .into_par_iter()
            .map(|i| {
                let nn = tree.nearest(&tree.points()[i], 2);
                let (j, d) = nn.iter().copied().find(|&(j, _)| j != i).unwrap();
                if d < 1e-12 {
                    Err(CloudError::DuplicatePoint(i.min(j), i.max(j)))
                } else {
                    Ok(d)
                }
            })
            .collect();
        let mut total = 0.0;
        for s in &spacings {
            total += s.clone()?;
        }
        let mean_spacing = total / spacings.len() as f64;
        Ok(PointCloud { tree, mean_spacing })
    }

    pub fn points(&self) -> &[Point3] {
        self.tree.points()
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Mean nearest-neighbour distance.
    pub fn mean_spacing(&self) -> f64 {
        self.mean_spacing
    }

    pub fn nearest(&self, z: &Point3, k: usize) -> Vec<(usize, f64)> {
        self.tree.nearest(z, k)
    }

    pub fn centroid(&self) -> Point3 {
        self.points().iter().sum::<Point3>() / self.len() as f64
    }
}

/// Biquadratic height patch `s(u,v) = c0 + c1 u + c2 v + c3 u² + c4 uv + c5 v²`
/// over the frame `(e1, e2)` anchored at `origin`, heights along `e3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPatch {
    pub origin: Point3,
    pub frame: [Vec3; 3],
    pub coeffs: [f64; 6],
    pub rms: f64,
    pub neighbors: usize,
}

impl LocalPatch {
    pub fn height(&self, u: f64, v: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v
    }

    fn gradient(&self, u: f64, v: f64) -> (f64, f64) {
        let c = &self.coeffs;
        (
            c[1] + 2.0 * c[3] * u + c[4] * v,
            c[2] + c[4] * u + 2.0 * c[5] * v,
        )
    }

    pub fn to_local(&self, z: &Point3) -> Vec3 {
        let d = z - self.origin;
        Vec3::new(
            d.dot(&self.frame[0]),
            d.dot(&self.frame[1]),
            d.dot(&self.frame[2]),
        )
    }

    pub fn surface_point(&self, u: f64, v: f64) -> Point3 {
        self.origin + u * self.frame[0] + v * self.frame[1] + self.height(u, v) * self.frame[2]
    }

    /// Unit normal of the patch at `(u, v)`, on the `+e3` side.
    pub fn normal(&self, u: f64, v: f64) -> Vec3 {
        let (su, sv) = self.gradient(u, v);
        (self.frame[2] - su * self.frame[0] - sv * self.frame[1]).normalize()
    }

    /// Normal curvature in the 3-D tangent direction `t`, positive when the
    /// surface bends away from `outward`.
    pub fn normal_curvature(&self, u: f64, v: f64, t: &Vec3, outward: &Vec3) -> f64 {
        let (su, sv) = self.gradient(u, v);
        let c = &self.coeffs;
        let xu = self.frame[0] + su * self.frame[2];
        let xv = self.frame[1] + sv * self.frame[2];
        // Parameter-space direction whose image is closest to t.
        let g = nalgebra::Matrix2::new(xu.dot(&xu), xu.dot(&xv), xu.dot(&xv), xv.dot(&xv));
        let rhs = nalgebra::Vector2::new(t.dot(&xu), t.dot(&xv));
        let Some(duv) = g.lu().solve(&rhs) else {
            return 0.0;
        };
        let (du, dv) = (duv.x, duv.y);
        let w = (1.0 + su * su + sv * sv).sqrt();
        let second = (2.0 * c[3] * du * du + 2.0 * c[4] * du * dv + 2.0 * c[5] * dv * dv) / w;
        let first = g[(0, 0)] * du * du + 2.0 * g[(0, 1)] * du * dv + g[(1, 1)] * dv * dv;
        let up = self.normal(u, v);
        -second / first * up.dot(outward).signum()
    }
}

pub fn fit_local_patch(cloud: &PointCloud, z: &Point3, k: usize) -> Result<LocalPatch, CloudError> {
    if k < 6 {
        return Err(CloudError::TooFewNeighbors(k));
    }
    if cloud.len() < k {
        return Err(CloudError::TooFewPoints(cloud.len()));
    }
    let nbrs = cloud.nearest(z, k);
    let pts: Vec<Point3> = nbrs.iter().map(|&(i, _)| cloud.points()[i]).collect();
    fit_patch_to(&pts, z)
}

fn fit_patch_to(pts: &[Point3], z: &Point3) -> Result<LocalPatch, CloudError> {
    let origin = pts.iter().sum::<Point3>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - origin;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l_mid, l_big) = (eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]);
    if !(l_big > 0.0) || l_mid <= 1e-12 * l_big {
        return Err(CloudError::DegenerateNeighborhood([z.x, z.y, z.z]));
    }
    let e3: Vec3 = eig.eigenvectors.column(idx[0]).into_owned();
    let e1: Vec3 = eig.eigenvectors.column(idx[2]).into_owned();
    let e2 = e3.cross(&e1);
    let frame = [e1, e2, e3];

    // Least squares for the six coefficients; scale columns by the patch extent.
    let scale = pts
        .iter()
        .map(|p| (p - origin).norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut ata = SMatrix::<f64, 6, 6>::zeros();
    let mut atb = SVector::<f64, 6>::zeros();
    let mut rows = Vec::with_capacity(pts.len());
    for p in pts {
        let d = p - origin;
        let (u, v, w) = (d.dot(&e1) / scale, d.dot(&e2) / scale, d.dot(&e3));
        let row = SVector::<f64, 6>::from([1.0, u, v, u * u, u * v, v * v]);
        ata += row * row.transpose();
        atb += row * w;
        rows.push((row, w));
    }
    let sol = ata
        .svd(true, true)
        .solve(&atb, 1e-14)
        .map_err(|_| CloudError::DegenerateNeighborhood([z.x, z.y, z.z]))?;
    let rss: f64 = rows
        .iter()
        .map(|(row, w)| (row.dot(&sol) - w).powi(2))
        .sum();
    let s = scale;
    let coeffs = [
        sol[0],
        sol[1] / s,
        sol[2] / s,
        sol[3] / (s * s),
        sol[4] / (s * s),
        sol[5] / (s * s),
    ];
    Ok(LocalPatch {
        origin,
        frame,
        coeffs,
        rms: (rss / pts.len() as f64).sqrt(),
        neighbors: pts.len(),
    })
}

/// Parameters `(u, v)` of the closest point of `z` on the patch.
pub fn newton_patch_params(patch: &LocalPatch, z: &Point3) -> Result<(f64, f64), CloudError> {
    let q = patch.to_local(z);
    let objective = |u: f64, v: f64| {
        let s = patch.height(u, v);
        0.5 * ((u - q.x).powi(2) + (v - q.y).powi(2) + (s - q.z).powi(2))
    };
    let c = patch.coeffs;
    let derivs = |u: f64, v: f64| {
        let s = patch.height(u, v);
        let (su, sv) = patch.gradient(u, v);
        let r = s - q.z;
        let g = nalgebra::Vector2::new(u - q.x + r * su, v - q.y + r * sv);
        let h = nalgebra::Matrix2::new(
            1.0 + su * su + r * 2.0 * c[3],
            su * sv + r * c[4],
            su * sv + r * c[4],
            1.0 + sv * sv + r * 2.0 * c[5],
        );
        (g, h)
    };
    let (mut u, mut v) = (q.x, q.y);
    let length_scale = 1.0 + q.norm();
    for _ in 0..NEWTON_MAX_ITER {
        let (g, h) = derivs(u, v);
        if g.norm() <= 1e-12 * length_scale {
            let pd = h[(0, 0)] > 0.0 && h.determinant() > 0.0;
            return if pd {
                Ok((u, v))
            } else {
                Err(CloudError::NewtonDiverged)
            };
        }
        let pd = h[(0, 0)] > 0.0 && h.determinant() > 0.0;
        let step = if pd {
            -(h.lu().solve(&g).unwrap_or(g))
        } else {
            -g
        };
        let f0 = objective(u, v);
        // Near the minimum the decrease drops below the objective's rounding
        // error, so allow increases of that size.
        let slack = 8.0 * f64::EPSILON * f0.abs();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (nu, nv) = (u + t * step.x, v + t * step.y);
            if objective(nu, nv) <= f0 + slack {
                u = nu;
                v = nv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (g, h) = derivs(u, v);
    if g.norm() <= 1e-10 && h[(0, 0)] > 0.0 && h.determinant() > 0.0 {
        Ok((u, v))
    } else {
        Err(CloudError::NewtonDiverged)
    }
}

pub fn newton_closest_point(patch: &LocalPatch, z: &Point3) -> Result<Point3, CloudError> {
    let (u, v) = newton_patch_params(patch, z)?;
    Ok(patch.surface_point(u, v))
}

/// How signed distances from a cloud get their sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    /// Propagate PCA normals over the k-nearest-neighbour graph, seeded at
    /// the sample farthest from the centroid.
    Propagate,
    /// Normals point away from a known interior point.
    InteriorPoint(Point3),
}

/// Point-cloud backed closest-point map.
#[derive(Debug)]
pub struct CloudSurface {
    cloud: PointCloud,
    normals: Vec<Vec3>,
    k: usize,
    fd_step: f64,
    reach: f64,
    poor_patches: AtomicUsize,
}

/// Interpolated closest point plus the patch it was computed on.
#[derive(Debug, Clone, Copy)]
pub struct PatchProjection {
    pub cp: Point3,
    pub patch: LocalPatch,
    pub uv: (f64, f64),
    pub fallback: bool,
}

impl CloudSurface {
    /// `fd_step` is the finite-difference step for the Jacobian (the grid
    /// spacing); `reach` is the largest admissible distance to the cloud.
    pub fn new(cloud: PointCloud, orientation: Orientation, fd_step: f64, reach: f64) -> Self {
        let normals = oriented_normals(&cloud, orientation);
        CloudSurface {
            cloud,
            normals,
            k: DEFAULT_NEIGHBORS,
            fd_step,
            reach,
            poor_patches: AtomicUsize::new(0),
        }
    }

    pub fn with_neighbors(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// Number of patch fits so far whose residual exceeded the mean spacing
    /// even after widening the neighbourhood.
    pub fn poor_patch_count(&self) -> usize {
        self.poor_patches.load(Ordering::Relaxed)
    }

    /// Closest point on the local patch, falling back to the nearest sample
    /// when Newton fails.
    pub fn project(&self, z: &Point3) -> Result<PatchProjection, CloudError> {
        let nearest = self.cloud.nearest(z, 1)[0];
        if nearest.1 > self.reach {
            return Err(CloudError::OutOfReach {
                distance: nearest.1,
                reach: self.reach,
            });
        }
        let mut patch = fit_local_patch(&self.cloud, z, self.k)?;
        let tol = self.cloud.mean_spacing();
        if patch.rms > tol {
            let wider = fit_local_patch(&self.cloud, z, FALLBACK_NEIGHBORS.max(self.k))?;
            if wider.rms > tol {
                self.poor_patches.fetch_add(1, Ordering::Relaxed);
                log::debug!(
                    "patch residual {} exceeds spacing {} near {:?}",
                    wider.rms,
                    tol,
                    z
                );
            }
            if wider.rms < patch.rms {
                patch = wider;
            }
        }
        match newton_patch_params(&patch, z) {
            Ok(uv) => Ok(PatchProjection {
                cp: patch.surface_point(uv.0, uv.1),
                patch,
                uv,
                fallback: false,
            }),
            Err(CloudError::NewtonDiverged) => {
                let p = self.cloud.points()[nearest.0];
                let q = patch.to_local(&p);
                Ok(PatchProjection {
                    cp: p,
                    patch,
                    uv: (q.x, q.y),
                    fallback: true,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Assemble a record from the projection at `z` and the Jacobian columns.
    fn assemble(
        &self,
        z: &Point3,
        center: &PatchProjection,
        jac: &Matrix3<f64>,
    ) -> Result<ClosestPointRecord, CloudError> {
        let svd = jac.svd(true, true);
        let v_t = svd
            .v_t
            .ok_or(CloudError::DegenerateJacobian([z.x, z.y, z.z]))?;
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sv = |i: usize| svd.singular_values[idx[i]];
        if !(sv(1) > 0.0) {
            return Err(CloudError::DegenerateJacobian([z.x, z.y, z.z]));
        }
        let row = |i: usize| -> Vec3 { v_t.row(idx[i]).transpose().into_owned() };
        let t1 = row(0).normalize();
        let mut n = row(2).normalize();
        let nearest = self.cloud.nearest(&center.cp, 1)[0].0;
        if n.dot(&self.normals[nearest]) < 0.0 {
            n = -n;
        }
        let t2 = n.cross(&t1);
        let offset = z - center.cp;
        let dist = offset.norm() * if offset.dot(&n) < 0.0 { -1.0 } else { 1.0 };
        let (u, v) = center.uv;
        let parallel = |k: f64| k / (1.0 + dist * k);
        let k1 = parallel(center.patch.normal_curvature(u, v, &t1, &n));
        let k2 = parallel(center.patch.normal_curvature(u, v, &t2, &n));
        Ok(ClosestPointRecord {
            cp: center.cp,
            dist,
            t1,
            t2,
            n,
            sigma1: sv(0),
            sigma2: sv(1),
            kappa1: k1,
            kappa2: k2,
        })
    }

    fn jacobian_from<F>(&self, z: &Point3, mut eval: F) -> Result<Matrix3<f64>, CloudError>
    where
        F: FnMut(&Point3) -> Result<Point3, CloudError>,
    {
        let h = self.fd_step;
        let mut jac = Matrix3::zeros();
        for axis in 0..3 {
            let e = Vec3::ith(axis, h);
            let p2 = eval(&(z + 2.0 * e))?;
            let p1 = eval(&(z + e))?;
            let m1 = eval(&(z - e))?;
            let m2 = eval(&(z - 2.0 * e))?;
            jac.set_column(axis, &((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)));
        }
        Ok(jac)
    }
}

impl ClosestPointMap for CloudSurface {
    fn closest_point(&self, z: &Point3) -> Result<ClosestPointRecord, GeometryError> {
        let center = self.project(z)?;
        let jac = self.jacobian_from(z, |p| self.project(p).map(|pp| pp.cp))?;
        Ok(self.assemble(z, &center, &jac)?)
    }

    fn closest_points(&self, zs: &[Point3]) -> Vec<Result<ClosestPointRecord, GeometryError>> {
        cp_field_from_cloud(self, zs)
            .into_iter()
            .map(|r| r.map_err(GeometryError::from))
            .collect()
    }

    fn coarse_distance(&self, z: &Point3) -> Option<f64> {
        self.cloud.nearest(z, 1).first().map(|&(_, d)| d)
    }

    fn coarse_distance_hint(&self) -> Option<f64> {
        Some(2.0 * self.cloud.mean_spacing())
    }
}

fn cache_key(p: &Point3, h: f64) -> [i64; 3] {
    let q = p / h * 1024.0;
    [q.x.round() as i64, q.y.round() as i64, q.z.round() as i64]
}

/// Records for many nodes at once. Stencil evaluations shared between
/// grid-aligned nodes are computed once.
pub fn cp_field_from_cloud(
    surface: &CloudSurface,
    nodes: &[Point3],
) -> Vec<Result<ClosestPointRecord, CloudError>> {
    let h = surface.fd_step;
    let mut wanted: HashMap<[i64; 3], Point3> = HashMap::new();
    for z in nodes {
        wanted.insert(cache_key(z, h), *z);
        for axis in 0..3 {
            for m in [-2.0, -1.0, 1.0, 2.0] {
                let p = z + Vec3::ith(axis, m * h);
                wanted.insert(cache_key(&p, h), p);
            }
        }
    }
    let entries: Vec<([i64; 3], Point3)> = wanted.into_iter().collect();
    let projected: HashMap<[i64; 3], Result<PatchProjection, CloudError>> = entries
        .par_iter()
        .map(|(key, p)| (*key, surface.project(p)))
        .collect();
    nodes
        .par_iter()
        .map(|z| {
            let center = projected[&cache_key(z, h)].clone()?;
            let jac = surface
                .jacobian_from(z, |p| projected[&cache_key(p, h)].clone().map(|pp| pp.cp))?;
            surface.assemble(z, &center, &jac)
        })
        .collect()
}

fn pca_normal(pts: &[Point3]) -> Vec3 {
    let c = pts.iter().sum::<Point3>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned()
}

#[derive(PartialEq)]
struct Edge(f64, usize);
impl Eq for Edge {}
impl PartialOrd for Edge {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Edge {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

/// Per-sample unit normals with a globally consistent orientation.
pub fn oriented_normals(cloud: &PointCloud, orientation: Orientation) -> Vec<Vec3> {
    let k = DEFAULT_NEIGHBORS.min(cloud.len());
    let nbrs: Vec<Vec<usize>> = cloud
        .points()
        .par_iter()
        .map(|p| cloud.nearest(p, k).into_iter().map(|(i, _)| i).collect())
        .collect();
    let mut normals: Vec<Vec3> = nbrs
        .par_iter()
        .map(|idx| pca_normal(&idx.iter().map(|&i| cloud.points()[i]).collect::<Vec<_>>()))
        .collect();
    match orientation {
        Orientation::InteriorPoint(inside) => {
            for (n, p) in normals.iter_mut().zip(cloud.points()) {
                if n.dot(&(p - inside)) < 0.0 {
                    *n = -*n;
                }
            }
        }
        Orientation::Propagate => {
            let centroid = cloud.centroid();
            let mut done = vec![false; cloud.len()];
            let mut remaining = cloud.len();
            while remaining > 0 {
                // Seed each connected component at its sample farthest from the centroid.
                let seed = (0..cloud.len())
                    .filter(|&i| !done[i])
                    .max_by(|&a, &b| {
                        let da = (cloud.points()[a] - centroid).norm_squared();
                        let db = (cloud.points()[b] - centroid).norm_squared();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                if normals[seed].dot(&(cloud.points()[seed] - centroid)) < 0.0 {
                    normals[seed] = -normals[seed];
                }
                let mut heap = BinaryHeap::new();
                heap.push(Edge(2.0, seed));
                while let Some(Edge(_, i)) = heap.pop() {
                    if done[i] {
                        continue;
                    }
                    done[i] = true;
                    remaining -= 1;
                    for &j in &nbrs[i] {
                        if !done[j] {
                            if normals[j].dot(&normals[i]) < 0.0 {
                                normals[j] = -normals[j];
                            }
                            heap.push(Edge(normals[j].dot(&normals[i]).abs(), j));
                        }
                    }
                }
            }
        }
    }
    normals
}

pub fn read_xyz<R: BufRead>(reader: R) -> Result<Vec<Point3>, CloudError> {
    let mut pts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .take(3)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CloudError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        if vals.len() < 3 {
            return Err(CloudError::Parse {
                line: i + 1,
                msg: "expected three coordinates".into(),
            });
        }
        pts.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    Ok(pts)
}

/// ASCII PLY, vertex positions only.
pub fn read_ply<R: BufRead>(reader: R) -> Result<Vec<Point3>, CloudError> {
    let mut lines = reader.lines().enumerate();
    let perr = |line: usize, msg: &str| CloudError::Parse {
        line,
        msg: msg.to_string(),
    };
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == "ply" => {}
        _ => return Err(perr(1, "missing 'ply' magic")),
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut vertex_first = true;
    let mut seen_element = false;
    loop {
        let (i, line) = lines.next().ok_or_else(|| perr(0, "unterminated header"))?;
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(perr(i + 1, "only ASCII PLY is supported"));
                }
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_first = !seen_element;
                    vertex_count = Some(
                        count
                            .parse::<usize>()
                            .map_err(|_| perr(i + 1, "bad vertex count"))?,
                    );
                }
                seen_element = true;
            }
            ["property", .., name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    if !vertex_first {
        return Err(perr(0, "vertex element must come first"));
    }
    let n = vertex_count.ok_or_else(|| perr(0, "no vertex element"))?;
    let find = |c: &str| {
        props
            .iter()
            .position(|p| p == c)
            .ok_or_else(|| perr(0, "missing x/y/z property"))
    };
    let (ix, iy, iz) = (find("x")?, find("y")?, find("z")?);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let (i, line) = lines
            .next()
            .ok_or_else(|| perr(0, "fewer vertices than declared"))?;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| perr(i + 1, &e.to_string()))?;
        let get = |j: usize| {
            vals.get(j)
                .copied()
                .ok_or_else(|| perr(i + 1, "short vertex line"))
        };
        pts.push(Point3::new(get(ix)?, get(iy)?, get(iz)?));
    }
    Ok(pts)
}

pub fn read_cloud_file(path: &Path) -> Result<Vec<Point3>, CloudError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
    {
        Some(ext) if ext == "ply" => read_ply(reader),
        _ => read_xyz(reader),
    }
}

pub fn write_xyz<W: Write>(mut w: W, pts: &[Point3]) -> std::io::Result<()> {
    for p in pts {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Deterministic near-uniform samplings of the analytic test surfaces.
pub mod sampling {
    use super::*;
    use std::f64::consts::PI;

    fn golden_fraction(i: usize) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        (i as f64 * g).fract()
    }

    /// Fibonacci lattice on a sphere.
    pub fn sphere(center: Point3, radius: f64, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|i| {
                let zc = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - zc * zc).max(0.0).sqrt();
                let phi = 2.0 * PI * golden_fraction(i);
                center + radius * Vector3::new(r * phi.cos(), r * phi.sin(), zc)
            })
            .collect()
    }

    /// Golden-ratio lattice in the torus parameters, with the tube angle
    /// drawn through the inverse of its area-weighted distribution.
    pub fn torus(center: Point3, major: f64, minor: f64, n: usize) -> Vec<Point3> {
        let ratio = minor / major;
        (0..n)
            .map(|i| {
                let target = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                // Solve phi + ratio sin(phi) = target.
                let mut phi = target;
                for _ in 0..50 {
                    let f = phi + ratio * phi.sin() - target;
                    phi -= f / (1.0 + ratio * phi.cos());
                    if f.abs() < 1e-15 {
                        break;
                    }
                }
                let theta = 2.0 * PI * golden_fraction(i);
                let w = major + minor * phi.cos();
                center + Vector3::new(w * theta.cos(), w * theta.sin(), minor * phi.sin())
            })
            .collect()
    }
}
