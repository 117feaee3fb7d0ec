//! Analytic closed surfaces and their closest-point maps.
//!
//! Every point `z` close enough to a surface Γ has a unique closest point
//! `cp = P(z)`, a signed distance `d` (positive outside), and a local frame
//! `(t1, t2, n)` where `t1`, `t2` are principal directions of the parallel
//! surface through `z`. The Jacobian of `P` has singular values
//! `sigma_i = 1 - d * kappa_i` along `t_i` and zero along `n`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointcloud::CloudError;

pub type Point3 = Vector3<f64>;
pub type Vec3 = Vector3<f64>;

/// Distance below which a query is treated as sitting on the medial axis.
pub const MEDIAL_AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {0:?} lies on the medial axis of the surface; closest point is not unique")]
    MedialAxisPoint([f64; 3]),
    #[error("singular values ({sigma1}, {sigma2}) are not positive: band too thick for the local curvature")]
    DegenerateBand { sigma1: f64, sigma2: f64 },
    #[error("invalid surface parameters: {0}")]
    InvalidSurface(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Geometric payload attached to a point `z` near the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestPointRecord {
    pub cp: Point3,
    /// Signed distance, positive outside.
    pub dist: f64,
    pub t1: Vec3,
    pub t2: Vec3,
    /// Unit normal, pointing outward.
    pub n: Vec3,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Principal curvatures of the parallel surface through `z`.
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ClosestPointRecord {
    /// The query point this record was computed for.
    pub fn point(&self) -> Point3 {
        self.cp + self.dist * self.n
    }

    /// Principal curvatures of Γ itself at `cp`.
    ///
    /// Parallel-surface curvatures relate to those of Γ by
    /// `kappa_surface = kappa / sigma`.
    pub fn surface_curvatures(&self) -> (f64, f64) {
        (self.kappa1 / self.sigma1, self.kappa2 / self.sigma2)
    }

    /// The record of `cp` itself: same frame, zero distance, unit singular values.
    pub fn on_surface(&self) -> ClosestPointRecord {
        let (k1, k2) = self.surface_curvatures();
        ClosestPointRecord {
            cp: self.cp,
            dist: 0.0,
            t1: self.t1,
            t2: self.t2,
            n: self.n,
            sigma1: 1.0,
            sigma2: 1.0,
            kappa1: k1,
            kappa2: k2,
        }
    }

    /// Row-major symmetric B tensor packed as `[xx, yy, zz, xy, xz, yz]`.
    pub fn b_packed(&self, mu: f64) -> Result<[f64; 6], GeometryError> {
        let b = b_tensor(self, mu)?;
        Ok([
            b[(0, 0)],
            b[(1, 1)],
            b[(2, 2)],
            b[(0, 1)],
            b[(0, 2)],
            b[(1, 2)],
        ])
    }
}

/// Anything that can produce a closest-point record for an ambient point.
pub trait ClosestPointMap: Sync {
    fn closest_point(&self, z: &Point3) -> Result<ClosestPointRecord, GeometryError>;

    /// Batch query; implementations may share work between nearby points.
    fn closest_points(&self, zs: &[Point3]) -> Vec<Result<ClosestPointRecord, GeometryError>> {
        use rayon::prelude::*;
        zs.par_iter().map(|z| self.closest_point(z)).collect()
    }

    /// Cheap approximate unsigned distance used to skip far-away grid nodes.
    fn coarse_distance(&self, _z: &Point3) -> Option<f64> {
        None
    }

    /// Error bound of [`ClosestPointMap::coarse_distance`], or `None` when no
    /// coarse estimate exists.
    fn coarse_distance_hint(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalyticSurface {
    Sphere {
        center: Point3,
        radius: f64,
    },
    /// Torus with symmetry axis parallel to `z`.
    Torus {
        center: Point3,
        major: f64,
        minor: f64,
    },
}

impl AnalyticSurface {
    pub fn sphere(center: Point3, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidSurface(format!(
                "sphere radius {radius} must be positive"
            )));
        }
        Ok(AnalyticSurface::Sphere { center, radius })
    }

    pub fn torus(center: Point3, major: f64, minor: f64) -> Result<Self, GeometryError> {
        if !(minor > 0.0 && major > minor) {
            return Err(GeometryError::InvalidSurface(format!(
                "torus radii must satisfy major > minor > 0, got R={major}, rho={minor}"
            )));
        }
        Ok(AnalyticSurface::Torus {
            center,
            major,
            minor,
        })
    }

    pub fn center(&self) -> Point3 {
        match *self {
            AnalyticSurface::Sphere { center, .. } | AnalyticSurface::Torus { center, .. } => {
                center
            }
        }
    }

    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            AnalyticSurface::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            AnalyticSurface::Torus { major, minor, .. } => 4.0 * PI * PI * major * minor,
        }
    }

    /// Largest absolute principal curvature of the surface.
    pub fn max_curvature(&self) -> f64 {
        match *self {
            AnalyticSurface::Sphere { radius, .. } => 1.0 / radius,
            AnalyticSurface::Torus { minor, .. } => 1.0 / minor,
        }
    }

    /// Point of the surface at parameters `(theta, phi)`.
    ///
    /// Sphere: polar angle `theta` from +z, azimuth `phi`.
    /// Torus: `theta` around the symmetry axis, `phi` around the tube
    /// (measured from the outer equator).
    pub fn point_at(&self, theta: f64, phi: f64) -> Point3 {
        match *self {
            AnalyticSurface::Sphere { center, radius } => {
                center
                    + radius
                        * Vec3::new(
                            theta.sin() * phi.cos(),
                            theta.sin() * phi.sin(),
                            theta.cos(),
                        )
            }
            AnalyticSurface::Torus {
                center,
                major,
                minor,
            } => {
                let w = major + minor * phi.cos();
                center + Vec3::new(w * theta.cos(), w * theta.sin(), minor * phi.sin())
            }
        }
    }
}

impl ClosestPointMap for AnalyticSurface {
    fn closest_point(&self, z: &Point3) -> Result<ClosestPointRecord, GeometryError> {
        closest_point(self, z)
    }

    fn coarse_distance(&self, z: &Point3) -> Option<f64> {
        closest_point(self, z).ok().map(|r| r.dist.abs())
    }

    fn coarse_distance_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Deterministic unit tangent orthogonal to `n`, seeded by the axis along
/// which `n` has its smallest component.
pub fn tangent_seed(n: &Vec3) -> Vec3 {
    let a = n.abs();
    let axis = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (axis - axis.dot(n) * n).normalize()
}

pub fn closest_point(
    surface: &AnalyticSurface,
    z: &Point3,
) -> Result<ClosestPointRecord, GeometryError> {
    match *surface {
        AnalyticSurface::Sphere { center, radius } => {
            let v = z - center;
            let r = v.norm();
            if r < MEDIAL_AXIS_TOL {
                return Err(GeometryError::MedialAxisPoint([z.x, z.y, z.z]));
            }
            let n = v / r;
            let t1 = tangent_seed(&n);
            let t2 = n.cross(&t1);
            let dist = r - radius;
            let sigma = radius / r;
            Ok(ClosestPointRecord {
                cp: center + radius * n,
                dist,
                t1,
                t2,
                n,
                sigma1: sigma,
                sigma2: sigma,
                kappa1: 1.0 / r,
                kappa2: 1.0 / r,
            })
        }
        AnalyticSurface::Torus {
            center,
            major,
            minor,
        } => {
            let v = z - center;
            let axial = v.xy().norm();
            if axial < MEDIAL_AXIS_TOL {
                return Err(GeometryError::MedialAxisPoint([z.x, z.y, z.z]));
            }
            let er = Vec3::new(v.x / axial, v.y / axial, 0.0);
            let core = center + major * er;
            let w = z - core;
            let tube = w.norm();
            if tube < MEDIAL_AXIS_TOL {
                return Err(GeometryError::MedialAxisPoint([z.x, z.y, z.z]));
            }
            let n = w / tube;
            // Major-circle direction, then the meridian direction completes the frame.
            let t1 = Vec3::new(-er.y, er.x, 0.0);
            let t2 = n.cross(&t1);
            let cos_phi = n.dot(&er);
            let dist = tube - minor;
            let kappa_major = cos_phi / axial;
            let kappa_minor = 1.0 / tube;
            Ok(ClosestPointRecord {
                cp: core + minor * n,
                dist,
                t1,
                t2,
                n,
                sigma1: (major + minor * cos_phi) / axial,
                sigma2: minor / tube,
                kappa1: kappa_major,
                kappa2: kappa_minor,
            })
        }
    }
}

/// `B = t1⊗t1 / sigma1 + t2⊗t2 / sigma2 + mu n⊗n`.
pub fn b_tensor(rec: &ClosestPointRecord, mu: f64) -> Result<Matrix3<f64>, GeometryError> {
    if !(rec.sigma1 > 0.0 && rec.sigma2 > 0.0) {
        return Err(GeometryError::DegenerateBand {
            sigma1: rec.sigma1,
            sigma2: rec.sigma2,
        });
    }
    Ok(rec.t1 * rec.t1.transpose() / rec.sigma1
        + rec.t2 * rec.t2.transpose() / rec.sigma2
        + mu * rec.n * rec.n.transpose())
}

/// Jacobian of the closest-point map, `sigma1 t1⊗t1 + sigma2 t2⊗t2`.
pub fn projection_jacobian(rec: &ClosestPointRecord) -> Matrix3<f64> {
    rec.sigma1 * rec.t1 * rec.t1.transpose() + rec.sigma2 * rec.t2 * rec.t2.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sphere() -> AnalyticSurface {
        AnalyticSurface::sphere(Vec3::new(0.5, 0.5, 0.5), 0.4).unwrap()
    }

    fn torus() -> AnalyticSurface {
        AnalyticSurface::torus(Vec3::new(0.5, 0.5, 0.5), 0.25, 0.10).unwrap()
    }

    #[test]
    fn sphere_radial_point() {
        let rec = closest_point(&sphere(), &Vec3::new(0.95, 0.5, 0.5)).unwrap();
        assert!((rec.cp - Vec3::new(0.9, 0.5, 0.5)).norm() < 1e-14);
        assert!((rec.dist - 0.05).abs() < 1e-14);
        assert!((rec.sigma1 - 0.4 / 0.45).abs() < 1e-14);
        assert!((rec.sigma2 - 0.4 / 0.45).abs() < 1e-14);
    }

    #[test]
    fn on_surface_identity() {
        for s in [sphere(), torus()] {
            let z = s.point_at(0.7, 1.9);
            let rec = closest_point(&s, &z).unwrap();
            assert!(rec.dist.abs() < 1e-14);
            assert!((rec.cp - z).norm() < 1e-14);
            assert!((rec.sigma1 - 1.0).abs() < 1e-12 && (rec.sigma2 - 1.0).abs() < 1e-12);
            let b = b_tensor(&rec, 1.0).unwrap();
            assert!((b - Matrix3::identity()).abs().max() < 1e-12);
        }
    }

    /// Brute-force closest point on the torus: dense parameter grid, then
    /// coordinate-wise golden-section refinement.
    fn torus_brute_force(z: &Point3) -> Point3 {
        let t = torus();
        let n = 2048;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..n {
            let th = 2.0 * PI * i as f64 / n as f64;
            for j in 0..n {
                let ph = 2.0 * PI * j as f64 / n as f64;
                let d = (t.point_at(th, ph) - z).norm_squared();
                if d < best.0 {
                    best = (d, th, ph);
                }
            }
        }
        let (_, mut th, mut ph) = best;
        let step = 2.0 * PI / n as f64;
        let golden = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(c) < f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            0.5 * (a + b)
        };
        for _ in 0..4 {
            th = golden(
                &|x| (t.point_at(x, ph) - z).norm_squared(),
                th - step,
                th + step,
            );
            ph = golden(
                &|x| (t.point_at(th, x) - z).norm_squared(),
                ph - step,
                ph + step,
            );
        }
        t.point_at(th, ph)
    }

    #[test]
    fn torus_matches_brute_force_oracle() {
        let z = Vec3::new(0.75, 0.5, 0.63);
        let oracle = torus_brute_force(&z);
        assert!((oracle - Vec3::new(0.75, 0.5, 0.6)).norm() < 1e-9);
        let rec = closest_point(&torus(), &z).unwrap();
        assert!((rec.cp - oracle).norm() < 1e-9);
        assert!((rec.dist - 0.03).abs() < 1e-12);
        let off = Vec3::new(0.61, 0.73, 0.47);
        let rec = closest_point(&torus(), &off).unwrap();
        let oracle = torus_brute_force(&off);
        assert!((rec.cp - oracle).norm() < 1e-8);
        assert!(((off - oracle).norm() - rec.dist.abs()).abs() < 1e-10);
    }

    #[test]
    fn medial_axis_rejected() {
        assert!(matches!(
            closest_point(&sphere(), &Vec3::new(0.5, 0.5, 0.5)),
            Err(GeometryError::MedialAxisPoint(_))
        ));
        assert!(matches!(
            closest_point(&torus(), &Vec3::new(0.75, 0.5, 0.5)),
            Err(GeometryError::MedialAxisPoint(_))
        ));
        assert!(matches!(
            closest_point(&torus(), &Vec3::new(0.5, 0.5, 0.9)),
            Err(GeometryError::MedialAxisPoint(_))
        ));
    }

    #[test]
    fn invalid_parameters() {
        assert!(AnalyticSurface::sphere(Vec3::zeros(), 0.0).is_err());
        assert!(AnalyticSurface::torus(Vec3::zeros(), 0.1, 0.2).is_err());
    }

    #[test]
    fn b_tensor_eigenpairs() {
        let rec = closest_point(&sphere(), &Vec3::new(0.95, 0.5, 0.5)).unwrap();
        let b = b_tensor(&rec, 1.0).unwrap();
        assert!((b * rec.t1 - rec.t1 * (0.45 / 0.4)).norm() < 1e-14);
        let b7 = b_tensor(&rec, 7.0).unwrap();
        assert!((b7 * rec.n - 7.0 * rec.n).norm() < 1e-14);
        assert!((b7 - b7.transpose()).abs().max() == 0.0);
        let bad = ClosestPointRecord {
            sigma1: -0.1,
            ..rec
        };
        assert!(matches!(
            b_tensor(&bad, 1.0),
            Err(GeometryError::DegenerateBand { .. })
        ));
    }

    #[test]
    fn projection_jacobian_cases() {
        let s = sphere();
        let on = closest_point(&s, &s.point_at(1.0, 2.0)).unwrap();
        let pj = projection_jacobian(&on);
        let proj = Matrix3::identity() - on.n * on.n.transpose();
        assert!((pj - proj).abs().max() < 1e-14);
        let rec = closest_point(&s, &Vec3::new(0.95, 0.5, 0.5)).unwrap();
        let pj = projection_jacobian(&rec);
        let mut sv: Vec<f64> = pj.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((sv[0] - 0.4 / 0.45).abs() < 1e-12);
        assert!((sv[1] - 0.4 / 0.45).abs() < 1e-12);
        assert!(sv[2].abs() < 1e-12);
        assert!((pj * rec.n).norm() < 1e-14);
    }

    #[test]
    fn surface_lift_constant_along_normal() {
        let t = torus();
        let base = t.point_at(0.3, 2.5);
        let on = closest_point(&t, &base).unwrap();
        let off = closest_point(&t, &(base + 0.03 * on.n)).unwrap();
        let (a1, a2) = on.surface_curvatures();
        let (b1, b2) = off.surface_curvatures();
        assert!((a1 - b1).abs() < 1e-10 && (a2 - b2).abs() < 1e-10);
    }

    fn band_point(surface: AnalyticSurface) -> impl Strategy<Value = Point3> {
        (0.0..PI, 0.0..2.0 * PI, -0.04..0.04f64).prop_map(move |(a, b, d)| {
            let x = surface.point_at(a, b);
            let n = closest_point(&surface, &x).unwrap().n;
            x + d * n
        })
    }

    fn check_record(surface: &AnalyticSurface, z: &Point3) {
        let rec = closest_point(surface, z).unwrap();
        assert!(((z - rec.cp).norm() - rec.dist.abs()).abs() < 1e-10);
        let frame = Matrix3::from_columns(&[rec.t1, rec.t2, rec.n]);
        assert!(
            (frame.transpose() * frame - Matrix3::identity())
                .abs()
                .max()
                < 1e-10
        );
        assert!((rec.sigma1 - (1.0 - rec.dist * rec.kappa1)).abs() < 1e-10);
        assert!((rec.sigma2 - (1.0 - rec.dist * rec.kappa2)).abs() < 1e-10);
        let again = closest_point(surface, &rec.cp).unwrap();
        assert!(again.dist.abs() < 1e-10 && (again.cp - rec.cp).norm() < 1e-10);
        if rec.dist.abs() > 1e-6 {
            assert!(((z - rec.cp) / rec.dist - rec.n).norm() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn sphere_record_invariants(z in band_point(AnalyticSurface::Sphere { center: Vec3::new(0.5, 0.5, 0.5), radius: 0.4 })) {
            check_record(&sphere(), &z);
        }

        #[test]
        fn torus_record_invariants(z in band_point(AnalyticSurface::Torus { center: Vec3::new(0.5, 0.5, 0.5), major: 0.25, minor: 0.1 })) {
            check_record(&torus(), &z);
        }

        #[test]
        fn b_is_identity_on_tangents(th in 0.0..2.0 * PI, a in 0.1..3.0f64, b in 0.0..6.2f64) {
            let t = torus();
            let rec = closest_point(&t, &t.point_at(a, b)).unwrap();
            let dir = th.cos() * rec.t1 + th.sin() * rec.t2;
            let bm = b_tensor(&rec, 1.0).unwrap();
            prop_assert!((bm * dir - dir).norm() < 1e-12);
        }
    }
}
