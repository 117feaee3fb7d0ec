//! First-order Lax-Friedrichs fast sweeping on the narrow band.

use nalgebra::Matrix3;
use rayon::prelude::*;
use thiserror::Error;

use crate::band::{NarrowBand, NodeClass};
use crate::geometry::{b_tensor, GeometryError, Vec3};
use crate::hamiltonian::{
    curvature_value_sampled, hamiltonian_value_with, HamiltonianError, HamiltonianModel,
    SampledSpeeds, SpeedModel,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no target nodes; call discretize_target first")]
    NoTargets,
    #[error("band was built with stencil reach {have}, solver needs {need}")]
    ReachTooSmall { have: usize, need: usize },
    #[error("sweeping did not converge after {sweeps} sweeps (last max update {change:.3e})")]
    NotConverged { sweeps: usize, change: f64 },
    #[error("time marching not steady after {steps} steps (rate {rate:.3e})")]
    NotSteady { steps: usize, rate: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] HamiltonianError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Stopping threshold on the largest update over one iteration;
    /// `None` means `1e-8 * big`.
    pub tol: Option<f64>,
    /// Limit on sweep iterations; one iteration visits all 8 orderings.
    pub max_sweeps: usize,
    pub sigma_scale: f64,
    /// Explicit per-axis viscosities; overrides the band bound.
    pub lf_sigma: Option<[f64; 3]>,
    /// Initial value on non-target nodes; `None` means `10 * diam / F1`.
    pub big: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tol: None,
            max_sweeps: 500,
            sigma_scale: 1.0,
            lf_sigma: None,
            big: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionField {
    /// One value per band slot, ghosts included.
    pub values: Vec<f64>,
    /// Minimizing control per band node (anisotropic solves).
    pub argmin_control: Option<Vec<Vec3>>,
    pub sweeps: usize,
    pub last_change: f64,
}

impl SolutionField {
    pub fn band_values<'a>(&'a self, band: &NarrowBand) -> &'a [f64] {
        &self.values[..band.band_len()]
    }
}

/// Per-node data shared by the first-order and WENO solvers.
#[derive(Debug, Clone)]
pub struct NodeTables {
    pub b: Vec<Matrix3<f64>>,
    pub fixed: Vec<bool>,
    pub sigma: [f64; 3],
    pub f_min: f64,
    pub f_max: f64,
    pub big: f64,
    /// Control sample angles and per-node speeds (`n_theta` per node) for
    /// curvature speeds.
    pub sampled: Option<(SampledSpeeds, Vec<f64>)>,
}

impl NodeTables {
    pub fn new(
        band: &NarrowBand,
        model: &HamiltonianModel,
        cfg: &SweepConfig,
    ) -> Result<Self, SolveError> {
        model.validate()?;
        if !(cfg.sigma_scale > 0.0) {
            return Err(SolveError::InvalidConfig(format!(
                "sigma_scale = {} must be > 0",
                cfg.sigma_scale
            )));
        }
        let nodes = band.band_nodes();
        let b = nodes
            .par_iter()
            .map(|n| b_tensor(&n.rec, model.mu))
            .collect::<Result<Vec<_>, _>>()?;
        let (f_min, f_max) = match &model.speed {
            SpeedModel::Isotropic(f) => nodes
                .par_iter()
                .map(|n| {
                    let v = f.eval(&n.rec.cp);
                    (v, v)
                })
                .reduce(|| (f64::INFINITY, 0.0), |a, c| (a.0.min(c.0), a.1.max(c.1))),
            SpeedModel::CurvatureAniso { b } => ((-b * band.max_curvature()).exp(), 1.0),
        };
        if !(f_min > 0.0) {
            return Err(SolveError::Model(HamiltonianError::InvalidModel(format!(
                "speed must be bounded below by a positive constant (min {f_min})"
            ))));
        }
        let sigma = match cfg.lf_sigma {
            Some(s) => s,
            None => {
                let mut s = [0.0f64; 3];
                for m in &b {
                    for (i, si) in s.iter_mut().enumerate() {
                        let row = m[(i, 0)].abs() + m[(i, 1)].abs() + m[(i, 2)].abs();
                        *si = si.max(row);
                    }
                }
                s.map(|x| cfg.sigma_scale * f_max * x)
            }
        };
        if sigma.iter().any(|&x| !(x > 0.0)) {
            return Err(SolveError::InvalidConfig(format!(
                "viscosities {sigma:?} must be positive"
            )));
        }
        let grid = band.grid();
        let extent = grid.h * (grid.dims[0].max(1) - 1) as f64;
        let diam = (extent * extent
            + (grid.h * (grid.dims[1].max(1) - 1) as f64).powi(2)
            + (grid.h * (grid.dims[2].max(1) - 1) as f64).powi(2))
        .sqrt();
        let big = cfg.big.unwrap_or(10.0 * diam / f_min);
        let mut fixed = vec![false; band.band_len()];
        for &(s, _) in band.targets() {
            fixed[s] = true;
        }
        let sampled = match model.speed {
            SpeedModel::CurvatureAniso { b: weight } => {
                let table = SampledSpeeds::new(model.controls.n_theta);
                let speeds = nodes
                    .par_iter()
                    .flat_map_iter(|n| {
                        let (k1, k2) = n.rec.surface_curvatures();
                        table.speeds(weight, k1, k2)
                    })
                    .collect();
                Some((table, speeds))
            }
            SpeedModel::Isotropic(_) => None,
        };
        Ok(NodeTables {
            b,
            fixed,
            sigma,
            f_min,
            f_max,
            big,
            sampled,
        })
    }
}

/// Central-difference gradient at band node `slot`.
#[inline]
pub fn central_gradient(band: &NarrowBand, values: &[f64], slot: usize) -> Vec3 {
    let inv = 0.5 / band.h();
    Vec3::new(
        (values[band.neighbor(slot, 0, 1, 1)] - values[band.neighbor(slot, 0, 0, 1)]) * inv,
        (values[band.neighbor(slot, 1, 1, 1)] - values[band.neighbor(slot, 1, 0, 1)]) * inv,
        (values[band.neighbor(slot, 2, 1, 1)] - values[band.neighbor(slot, 2, 0, 1)]) * inv,
    )
}

/// Lax-Friedrichs candidate value at `slot` and the minimizing control.
///
/// `v = [value(p_c) + sum_i s_i (v_i+ + v_i-) / (2h)] / (sum_i s_i / h)` with
/// `value = min_a { r + p · f B a }` evaluated at the central gradient.
pub fn lf_node_update(
    band: &NarrowBand,
    values: &[f64],
    slot: usize,
    model: &HamiltonianModel,
    tables: &NodeTables,
) -> (f64, Vec3) {
    let h = band.h();
    let p = central_gradient(band, values, slot);
    let rec = &band.nodes()[slot].rec;
    let (value, a) = match (&tables.sampled, &model.speed) {
        (Some((table, speeds)), SpeedModel::CurvatureAniso { b: weight }) => {
            let n = table.cos.len();
            let r = model.cost.r.eval(&rec.cp);
            curvature_value_sampled(
                rec,
                &tables.b[slot],
                &p,
                r,
                *weight,
                table,
                &speeds[slot * n..(slot + 1) * n],
            )
        }
        _ => hamiltonian_value_with(rec, &tables.b[slot], &p, model),
    };
    let mut num = value;
    let mut den = 0.0;
    for axis in 0..3 {
        let s = tables.sigma[axis];
        num += s
            * (values[band.neighbor(slot, axis, 0, 1)] + values[band.neighbor(slot, axis, 1, 1)])
            / (2.0 * h);
        den += s / h;
    }
    (num / den, a)
}

/// Band slots in the lexicographic order reversed along the axes flagged in `flip`.
fn ordering(band: &NarrowBand, flip: [bool; 3]) -> Vec<u32> {
    let mut out = Vec::with_capacity(band.band_len());
    let planes = band.planes();
    let pencils = band.pencils();
    let plane_ids: Box<dyn Iterator<Item = usize>> = if flip[0] {
        Box::new((0..planes.len()).rev())
    } else {
        Box::new(0..planes.len())
    };
    for pl in plane_ids {
        let (a, b) = planes[pl];
        let pencil_ids: Box<dyn Iterator<Item = usize>> = if flip[1] {
            Box::new((a..b).rev())
        } else {
            Box::new(a..b)
        };
        for pc in pencil_ids {
            let (s, e) = pencils[pc];
            if flip[2] {
                out.extend((s..e).rev().map(|x| x as u32));
            } else {
                out.extend((s..e).map(|x| x as u32));
            }
        }
    }
    out
}

/// Initial field: targets at their boundary values, everything else `big`.
pub fn initial_values(band: &NarrowBand, big: f64) -> Vec<f64> {
    let mut v = vec![big; band.len()];
    for &(s, val) in band.targets() {
        v[s] = val;
    }
    band.refresh_ghosts(&mut v);
    v
}

pub fn sweep_solve(
    band: &NarrowBand,
    model: &HamiltonianModel,
    cfg: &SweepConfig,
) -> Result<SolutionField, SolveError> {
    if band.targets().is_empty() {
        return Err(SolveError::NoTargets);
    }
    let tables = NodeTables::new(band, model, cfg)?;
    let tol = cfg.tol.unwrap_or(1e-8 * tables.big);
    if !(tol > 0.0) {
        return Err(SolveError::InvalidConfig(format!(
            "tol = {tol} must be > 0"
        )));
    }
    let mut values = initial_values(band, tables.big);
    let orders: Vec<Vec<u32>> = (0..8)
        .map(|m| ordering(band, [m & 1 != 0, m & 2 != 0, m & 4 != 0]))
        .collect();
    log::debug!(
        "sweep: {} band nodes, {} ghosts, sigma {:?}, big {:.3}, tol {:.3e}",
        band.band_len(),
        band.ghost_len(),
        tables.sigma,
        tables.big,
        tol
    );

    let mut sweeps = 0;
    let mut change = f64::INFINITY;
    while sweeps < cfg.max_sweeps && change >= tol {
        change = 0.0;
        for order in &orders {
            for &s in order {
                let s = s as usize;
                if tables.fixed[s] {
                    continue;
                }
                let (cand, _) = lf_node_update(band, &values, s, model, &tables);
                let old = values[s];
                if cand < old {
                    values[s] = cand;
                    change = f64::max(change, old - cand);
                }
            }
            band.refresh_ghosts(&mut values);
        }
        sweeps += 1;
    }
    log::debug!("sweep: stopped after {sweeps} sweeps, last change {change:.3e}");
    if change >= tol {
        return Err(SolveError::NotConverged { sweeps, change });
    }

    let argmin_control = if model.speed.is_isotropic() {
        None
    } else {
        Some(
            (0..band.band_len())
                .into_par_iter()
                .map(|s| lf_node_update(band, &values, s, model, &tables).1)
                .collect(),
        )
    };
    Ok(SolutionField {
        values,
        argmin_control,
        sweeps,
        last_change: change,
    })
}

/// Largest `|value(p_c)|` over free band nodes, split by `exclude`: returns
/// `(kept, excluded)`.
pub fn residual_masked(
    band: &NarrowBand,
    field: &SolutionField,
    model: &HamiltonianModel,
    exclude: impl Fn(usize) -> bool + Sync,
) -> Result<(f64, f64), SolveError> {
    let nodes = band.band_nodes();
    (0..band.band_len())
        .into_par_iter()
        .filter(|&s| nodes[s].class == NodeClass::Interior)
        .map(|s| {
            let b = b_tensor(&nodes[s].rec, model.mu)?;
            let p = central_gradient(band, &field.values, s);
            let r = hamiltonian_value_with(&nodes[s].rec, &b, &p, model).0.abs();
            Ok(if exclude(s) { (0.0, r) } else { (r, 0.0) })
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))
}

pub fn residual(
    band: &NarrowBand,
    field: &SolutionField,
    model: &HamiltonianModel,
) -> Result<f64, SolveError> {
    Ok(residual_masked(band, field, model, |_| false)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::CartesianGrid;
    use crate::geometry::{AnalyticSurface, Point3};

    fn sphere() -> AnalyticSurface {
        AnalyticSurface::sphere(Point3::new(0.5, 0.5, 0.5), 0.4).unwrap()
    }

    fn great_circle(s: &Point3, x: &Point3) -> f64 {
        let c = Point3::new(0.5, 0.5, 0.5);
        0.4 * ((x - c).dot(&(s - c)) / 0.16).clamp(-1.0, 1.0).acos()
    }

    fn coarse_band(sources: &[Point3]) -> NarrowBand {
        let s = sphere();
        let mut band = NarrowBand::build(CartesianGrid::unit_cube(41), &s, 0.09, 1).unwrap();
        band.discretize_target(&s, sources, 2.0 / 40.0, |_| 0.0)
            .unwrap();
        band
    }

    #[test]
    fn uninitialized_neighbours_stay_big() {
        let band = coarse_band(&[Point3::new(0.5, 0.5, 0.9)]);
        let model = HamiltonianModel::eikonal();
        let tables = NodeTables::new(&band, &model, &SweepConfig::default()).unwrap();
        let v = vec![tables.big; band.len()];
        let (cand, _) = lf_node_update(&band, &v, 0, &model, &tables);
        let den: f64 = tables.sigma.iter().sum::<f64>() / band.h();
        assert!((cand - (tables.big + 1.0 / den)).abs() < 1e-9);
    }

    #[test]
    fn exact_planar_field_is_fixed_point() {
        // Linear field along a tangent on a sphere band: only the curvature of
        // the band perturbs the update, which stays within O(h).
        let band = coarse_band(&[Point3::new(0.5, 0.5, 0.9)]);
        let model = HamiltonianModel::eikonal();
        let tables = NodeTables::new(&band, &model, &SweepConfig::default()).unwrap();
        let src = Point3::new(0.5, 0.5, 0.9);
        let v: Vec<f64> = band
            .nodes()
            .iter()
            .map(|n| great_circle(&src, &n.rec.cp))
            .collect();
        let h = band.h();
        let mut worst: f64 = 0.0;
        for (s, node) in band.band_nodes().iter().enumerate() {
            let u = great_circle(&src, &node.rec.cp);
            if !(0.15..=0.4 * std::f64::consts::PI - 0.15).contains(&u) {
                continue;
            }
            let (cand, _) = lf_node_update(&band, &v, s, &model, &tables);
            worst = worst.max((cand - v[s]).abs());
        }
        assert!(worst < 2.0 * h, "{worst}");
    }

    #[test]
    fn antipodal_sources_are_symmetric() {
        let a = Point3::new(0.5, 0.5, 0.9);
        let b = Point3::new(0.5, 0.5, 0.1);
        let band = coarse_band(&[a, b]);
        let model = HamiltonianModel::eikonal();
        let field = sweep_solve(&band, &model, &SweepConfig::default()).unwrap();
        let tol = 1e-8
            * NodeTables::new(&band, &model, &SweepConfig::default())
                .unwrap()
                .big;
        for (s, node) in band.band_nodes().iter().enumerate() {
            let i = node.index;
            let mirror = band
                .slot_of([i[0] as i64, i[1] as i64, 40 - i[2] as i64])
                .unwrap();
            assert!((field.values[s] - field.values[mirror]).abs() < 100.0 * tol + 1e-9);
        }
    }

    #[test]
    fn values_only_decrease_and_stay_above_targets() {
        let src = Point3::new(0.5, 0.5, 0.9);
        let band = coarse_band(&[src]);
        let model = HamiltonianModel::eikonal();
        let short = SweepConfig {
            max_sweeps: 3,
            ..SweepConfig::default()
        };
        let early = match sweep_solve(&band, &model, &short) {
            Err(SolveError::NotConverged { sweeps, .. }) => sweeps,
            other => panic!("{other:?}"),
        };
        assert_eq!(early, 3);
        let field = sweep_solve(&band, &model, &SweepConfig::default()).unwrap();
        let min_target = band
            .targets()
            .iter()
            .map(|t| t.1)
            .fold(f64::INFINITY, f64::min);
        assert!(field
            .band_values(&band)
            .iter()
            .all(|&v| v >= min_target - 1e-12));
        let h = band.h();
        for (s, node) in band.band_nodes().iter().enumerate() {
            assert!(
                (field.values[s] - great_circle(&src, &node.rec.cp)).abs() < 0.2,
                "{s}"
            );
        }
        let res = residual(&band, &field, &model).unwrap();
        assert!(res.is_finite() && res > 0.0);
        let (away, near_cut) = residual_masked(&band, &field, &model, |s| {
            (band.nodes()[s].rec.cp - Point3::new(0.5, 0.5, 0.1)).norm() < 4.0 * h
        })
        .unwrap();
        assert!(away <= res && near_cut <= res);
    }

    #[test]
    fn missing_targets_rejected() {
        let band = NarrowBand::build(CartesianGrid::unit_cube(41), &sphere(), 0.09, 1).unwrap();
        assert!(matches!(
            sweep_solve(&band, &HamiltonianModel::eikonal(), &SweepConfig::default()),
            Err(SolveError::NoTargets)
        ));
    }
}
