//! Running cost, speed models, control discretization and the extended
//! Hamiltonian evaluated at a band node.
//!
//! The value returned by [`hamiltonian_value`] is
//! `min_a { r(cp) + p · f(cp, a) B a }` over unit tangent controls `a`; the
//! viscosity solution satisfies `value = 0`. With an isotropic speed the
//! minimum has the closed form `r - f |B p|`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{ClosestPointRecord, Point3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("control direction is not tangent (a·n = {0})")]
    NotTangent(f64),
    #[error("{0}")]
    InvalidModel(String),
}

/// Scalar field on Γ, evaluated at closest points so that its extension is
/// constant along normals.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Function(Arc<dyn Fn(&Point3) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn function(f: impl Fn(&Point3) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Function(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &Point3) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Function(f) => f(x),
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SpeedModel {
    Isotropic(ScalarField),
    /// `f(x, a) = exp(-b |kappa_a(x)|)` with `kappa_a` the normal curvature of Γ.
    CurvatureAniso {
        b: f64,
    },
}

impl SpeedModel {
    pub fn is_isotropic(&self) -> bool {
        matches!(self, SpeedModel::Isotropic(_))
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    pub r: ScalarField,
    pub g: ScalarField,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            r: ScalarField::Constant(1.0),
            g: ScalarField::Constant(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlDisc {
    pub n_theta: usize,
}

impl Default for ControlDisc {
    fn default() -> Self {
        ControlDisc { n_theta: 32 }
    }
}

impl ControlDisc {
    pub fn new(n_theta: usize) -> Result<Self, HamiltonianError> {
        if n_theta < 8 {
            return Err(HamiltonianError::InvalidModel(format!(
                "n_theta = {n_theta} must be at least 8"
            )));
        }
        Ok(ControlDisc { n_theta })
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub speed: SpeedModel,
    pub cost: CostModel,
    pub controls: ControlDisc,
    pub mu: f64,
}

impl Default for HamiltonianModel {
    fn default() -> Self {
        HamiltonianModel {
            speed: SpeedModel::Isotropic(ScalarField::Constant(1.0)),
            cost: CostModel::default(),
            controls: ControlDisc::default(),
            mu: 1.0,
        }
    }
}

impl HamiltonianModel {
    pub fn eikonal() -> Self {
        Self::default()
    }

    pub fn curvature(b: f64) -> Self {
        HamiltonianModel {
            speed: SpeedModel::CurvatureAniso { b },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        ControlDisc::new(self.controls.n_theta)?;
        if let SpeedModel::CurvatureAniso { b } = self.speed {
            if !(b >= 0.0) {
                return Err(HamiltonianError::InvalidModel(format!(
                    "curvature weight b = {b} must be >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// `kappa1 (a·t1)² + kappa2 (a·t2)²`.
pub fn normal_curvature(rec: &ClosestPointRecord, a: &Vec3) -> Result<f64, HamiltonianError> {
    let an = a.dot(&rec.n);
    if an.abs() > 1e-8 {
        return Err(HamiltonianError::NotTangent(an));
    }
    let (c1, c2) = (a.dot(&rec.t1), a.dot(&rec.t2));
    Ok(rec.kappa1 * c1 * c1 + rec.kappa2 * c2 * c2)
}

/// Speed at the closest point of `rec` in direction `a`.
///
/// Curvatures are those of Γ at `cp`, so the extension does not vary along
/// normals.
pub fn speed(model: &SpeedModel, rec: &ClosestPointRecord, a: &Vec3) -> f64 {
    match model {
        SpeedModel::Isotropic(f) => f.eval(&rec.cp),
        SpeedModel::CurvatureAniso { b } => {
            let (k1, k2) = rec.surface_curvatures();
            let (c1, c2) = (a.dot(&rec.t1), a.dot(&rec.t2));
            (-b * (k1 * c1 * c1 + k2 * c2 * c2).abs()).exp()
        }
    }
}

/// Curvature speed with the tangent direction given by its frame angle.
#[inline]
fn aniso_speed(b: f64, k1: f64, k2: f64, theta: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    (-b * (k1 * c * c + k2 * s * s).abs()).exp()
}

/// Value of the minimized Hamiltonian and the minimizing control.
///
/// `b` is the B tensor of `rec`, passed in so callers can cache it.
pub fn hamiltonian_value_with(
    rec: &ClosestPointRecord,
    b: &nalgebra::Matrix3<f64>,
    p: &Vec3,
    model: &HamiltonianModel,
) -> (f64, Vec3) {
    let r = model.cost.r.eval(&rec.cp);
    match &model.speed {
        SpeedModel::Isotropic(f) => {
            let f = f.eval(&rec.cp);
            let bp = b * p;
            let tangent = bp - bp.dot(&rec.n) * rec.n;
            let tn = tangent.norm();
            let a = if tn > 0.0 { -tangent / tn } else { rec.t1 };
            (r - f * bp.norm(), a)
        }
        SpeedModel::CurvatureAniso { b: weight } => {
            let table = SampledSpeeds::new(model.controls.n_theta);
            let (k1, k2) = rec.surface_curvatures();
            let speeds = table.speeds(*weight, k1, k2);
            curvature_value_sampled(rec, b, p, r, *weight, &table, &speeds)
        }
    }
}

pub fn hamiltonian_value(
    rec: &ClosestPointRecord,
    mu: f64,
    p: &Vec3,
    model: &HamiltonianModel,
) -> Result<(f64, Vec3), crate::geometry::GeometryError> {
    let b = crate::geometry::b_tensor(rec, mu)?;
    Ok(hamiltonian_value_with(rec, &b, p, model))
}

/// Minimize a 2π-periodic function: exhaustive sampling on `n` angles, then
/// successive parabolic steps inside the bracket around the best sample.
pub fn minimize_angle(f: &impl Fn(f64) -> f64, n: usize) -> f64 {
    minimize_angle_sampled(f, n, |k| f(k as f64 * 2.0 * PI / n as f64)).0
}

/// As [`minimize_angle`], with the values at the `n` sample angles supplied
/// by `sample`; returns the angle and the value there.
pub fn minimize_angle_sampled(
    f: &impl Fn(f64) -> f64,
    n: usize,
    sample: impl Fn(usize) -> f64,
) -> (f64, f64) {
    let step = 2.0 * PI / n as f64;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..n {
        let v = sample(k);
        if v < best.1 {
            best = (k, v);
        }
    }
    let k = best.0;
    let center = k as f64 * step;
    let (mut a, mut b) = (center - step, center + step);
    let (mut x, mut fx) = (center, best.1);
    let (mut fa, mut fb) = (sample((k + n - 1) % n), sample((k + 1) % n));
    for _ in 0..8 {
        // Parabola through (a, fa), (x, fx), (b, fb).
        let d1 = (x - a) * (fx - fb);
        let d2 = (x - b) * (fx - fa);
        let denom = 2.0 * (d1 - d2);
        if denom.abs() < 1e-300 {
            break;
        }
        let u = x - ((x - a) * d1 - (x - b) * d2) / denom;
        if !(u > a && u < b) || (u - x).abs() < 1e-12 {
            break;
        }
        let fu = f(u);
        if fu < fx {
            if u < x {
                b = x;
                fb = fx;
            } else {
                a = x;
                fa = fx;
            }
            x = u;
            fx = fu;
        } else if u < x {
            a = u;
            fa = fu;
        } else {
            b = u;
            fb = fu;
        }
    }
    (x, fx)
}

/// Sample angles of a control disc with the curvature speed at each, for
/// one node. Lets sweeps skip the exponentials.
#[derive(Debug, Clone)]
pub struct SampledSpeeds {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl SampledSpeeds {
    pub fn new(n: usize) -> Self {
        let step = 2.0 * PI / n as f64;
        let (sin, cos) = (0..n).map(|k| (k as f64 * step).sin_cos()).unzip();
        SampledSpeeds { cos, sin }
    }

    /// `exp(-b |k1 c² + k2 s²|)` at every sample angle.
    pub fn speeds(&self, b: f64, k1: f64, k2: f64) -> Vec<f64> {
        self.cos
            .iter()
            .zip(&self.sin)
            .map(|(c, s)| (-b * (k1 * c * c + k2 * s * s).abs()).exp())
            .collect()
    }
}

/// Curvature-speed Hamiltonian using precomputed sample speeds; agrees with
/// [`hamiltonian_value_with`] bit for bit.
pub fn curvature_value_sampled(
    rec: &ClosestPointRecord,
    b: &nalgebra::Matrix3<f64>,
    p: &Vec3,
    r: f64,
    weight: f64,
    table: &SampledSpeeds,
    speeds: &[f64],
) -> (f64, Vec3) {
    let bp = b * p;
    let (q1, q2) = (bp.dot(&rec.t1), bp.dot(&rec.t2));
    let (k1, k2) = rec.surface_curvatures();
    let objective =
        |theta: f64| aniso_speed(weight, k1, k2, theta) * (q1 * theta.cos() + q2 * theta.sin());
    let (theta, value) = minimize_angle_sampled(&objective, speeds.len(), |k| {
        speeds[k] * (q1 * table.cos[k] + q2 * table.sin[k])
    });
    let (s, c) = theta.sin_cos();
    (r + value, c * rec.t1 + s * rec.t2)
}
