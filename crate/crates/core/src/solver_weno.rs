//! Third-order WENO / TVD-RK3 marching of `v_t + f |B ∇v| - r = 0` to steady
//! state, started from a first-order solution.

use rayon::prelude::*;

use crate::band::NarrowBand;
use crate::geometry::Vec3;
use crate::hamiltonian::{hamiltonian_value_with, HamiltonianModel};
use crate::solver_sweep::{NodeTables, SolutionField, SolveError, SweepConfig};

/// Nodes per axis and side read by the WENO3 stencil.
pub const WENO_REACH: usize = 2;

const WENO_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMarchConfig {
    pub cfl: f64,
    /// Stop once `max |Δv| / Δt` over one step drops below this.
    pub steady_tol: f64,
    pub max_steps: usize,
    /// Scale of the Lax-Friedrichs splitting constants.
    pub sigma_scale: f64,
}

impl Default for TimeMarchConfig {
    fn default() -> Self {
        TimeMarchConfig {
            cfl: 0.5,
            steady_tol: 1e-6,
            max_steps: 20_000,
            sigma_scale: 1.0,
        }
    }
}

/// One-sided WENO3 derivatives from five consecutive samples centred on
/// `v[2]`; returns `(left-biased, right-biased)`.
#[inline]
pub fn weno3_derivatives(v: [f64; 5], h: f64) -> (f64, f64) {
    // Divided differences D_k = (v[k+1] - v[k]) / h for k = 0..4.
    let d = [
        (v[1] - v[0]) / h,
        (v[2] - v[1]) / h,
        (v[3] - v[2]) / h,
        (v[4] - v[3]) / h,
    ];
    let left = {
        let b0 = (d[1] - d[0]).powi(2);
        let b1 = (d[2] - d[1]).powi(2);
        let r = (WENO_EPS + b0) / (WENO_EPS + b1);
        let w0 = 1.0 / (1.0 + 2.0 * r * r);
        0.5 * (d[1] + d[2]) - 0.5 * w0 * (d[0] - 2.0 * d[1] + d[2])
    };
    let right = {
        let b0 = (d[3] - d[2]).powi(2);
        let b1 = (d[2] - d[1]).powi(2);
        let r = (WENO_EPS + b0) / (WENO_EPS + b1);
        let w0 = 1.0 / (1.0 + 2.0 * r * r);
        0.5 * (d[1] + d[2]) - 0.5 * w0 * (d[3] - 2.0 * d[2] + d[1])
    };
    (left, right)
}

/// WENO3 one-sided derivatives of `values` at band node `slot` along `axis`.
#[inline]
pub fn weno3_gradient(band: &NarrowBand, values: &[f64], slot: usize, axis: usize) -> (f64, f64) {
    let v = [
        values[band.neighbor(slot, axis, 0, 2)],
        values[band.neighbor(slot, axis, 0, 1)],
        values[slot],
        values[band.neighbor(slot, axis, 1, 1)],
        values[band.neighbor(slot, axis, 1, 2)],
    ];
    weno3_derivatives(v, band.h())
}

/// Lax-Friedrichs split numerical Hamiltonian `H(p̄) - Σ α_i (p_i⁺ - p_i⁻) / 2`
/// with `H = -value`.
#[inline]
fn numerical_hamiltonian(
    band: &NarrowBand,
    values: &[f64],
    slot: usize,
    model: &HamiltonianModel,
    tables: &NodeTables,
) -> f64 {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for axis in 0..3 {
        let (l, r) = weno3_gradient(band, values, slot, axis);
        lo[axis] = l;
        hi[axis] = r;
    }
    let p = Vec3::new(
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    );
    let (value, _) = hamiltonian_value_with(&band.nodes()[slot].rec, &tables.b[slot], &p, model);
    let mut h = -value;
    for axis in 0..3 {
        h -= tables.sigma[axis] * 0.5 * (hi[axis] - lo[axis]);
    }
    h
}

/// `-Ĥ` on free band nodes, 0 on targets.
fn rhs(
    band: &NarrowBand,
    values: &[f64],
    model: &HamiltonianModel,
    tables: &NodeTables,
) -> Vec<f64> {
    (0..band.band_len())
        .into_par_iter()
        .map(|s| {
            if tables.fixed[s] {
                0.0
            } else {
                -numerical_hamiltonian(band, values, s, model, tables)
            }
        })
        .collect()
}

pub fn steady_state_solve(
    band: &NarrowBand,
    model: &HamiltonianModel,
    init: &SolutionField,
    cfg: &TimeMarchConfig,
) -> Result<SolutionField, SolveError> {
    if !model.speed.is_isotropic() {
        return Err(SolveError::InvalidConfig(
            "time marching supports isotropic speeds only".into(),
        ));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= 0.9) {
        return Err(SolveError::InvalidConfig(format!(
            "cfl = {} must lie in (0, 0.9]",
            cfg.cfl
        )));
    }
    if !(cfg.steady_tol > 0.0) {
        return Err(SolveError::InvalidConfig(format!(
            "steady_tol = {} must be > 0",
            cfg.steady_tol
        )));
    }
    if band.reach() < WENO_REACH {
        return Err(SolveError::ReachTooSmall {
            have: band.reach(),
            need: WENO_REACH,
        });
    }
    if band.targets().is_empty() {
        return Err(SolveError::NoTargets);
    }
    if init.values.len() != band.len() {
        return Err(SolveError::InvalidConfig(format!(
            "initial field has {} values, band has {}",
            init.values.len(),
            band.len()
        )));
    }
    let sweep_cfg = SweepConfig {
        sigma_scale: cfg.sigma_scale,
        ..SweepConfig::default()
    };
    let tables = NodeTables::new(band, model, &sweep_cfg)?;
    let dt = cfg.cfl * band.h() / tables.sigma.iter().sum::<f64>();
    let n = band.band_len();

    let mut v = init.values.clone();
    for &(s, val) in band.targets() {
        v[s] = val;
    }
    band.refresh_ghosts(&mut v);
    // Fixed nodes are skipped outright; the RK combinations do not
    // reproduce a value exactly even when its update is zero.
    let fixed = &tables.fixed[..n];
    let mut stage = v.clone();
    let mut rate = f64::INFINITY;
    let mut steps = 0;
    while steps < cfg.max_steps {
        // Stage 1.
        let l0 = rhs(band, &v, model, &tables);
        stage[..n]
            .par_iter_mut()
            .zip(&v[..n])
            .zip(&l0)
            .zip(fixed)
            .for_each(|(((s, &a), &l), &f)| *s = if f { a } else { a + dt * l });
        band.refresh_ghosts(&mut stage);
        // Stage 2.
        let l1 = rhs(band, &stage, model, &tables);
        stage[..n]
            .par_iter_mut()
            .zip(&v[..n])
            .zip(&l1)
            .zip(fixed)
            .for_each(|(((s, &a), &l), &f)| {
                if !f {
                    *s = 0.75 * a + 0.25 * (*s + dt * l);
                }
            });
        band.refresh_ghosts(&mut stage);
        // Stage 3.
        let l2 = rhs(band, &stage, model, &tables);
        let change = stage[..n]
            .par_iter()
            .zip(v[..n].par_iter_mut())
            .zip(&l2)
            .zip(fixed)
            .map(|(((&s, a), &l), &f)| {
                if f {
                    return 0.0;
                }
                let new = *a / 3.0 + 2.0 / 3.0 * (s + dt * l);
                let d = (new - *a).abs();
                *a = new;
                d
            })
            .reduce(|| 0.0, f64::max);
        band.refresh_ghosts(&mut v);
        steps += 1;
        rate = change / dt;
        if steps % 500 == 0 {
            log::debug!("weno: step {steps}, rate {rate:.3e}");
        }
        if rate < cfg.steady_tol {
            break;
        }
    }
    if rate >= cfg.steady_tol {
        return Err(SolveError::NotSteady { steps, rate });
    }
    log::debug!("weno: steady after {steps} steps (dt {dt:.3e})");
    Ok(SolutionField {
        values: v,
        argmin_control: None,
        sweeps: steps,
        last_change: rate,
    })
}
