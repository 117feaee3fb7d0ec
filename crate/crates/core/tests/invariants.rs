//! Cross-module properties on small solved problems.

use surfhjb_core::metrics::{l1_band_error, sphere_exact_distance};
use surfhjb_core::solver_weno::WENO_REACH;
use surfhjb_core::*;

const CENTER: Point3 = Point3::new(0.5, 0.5, 0.5);
const NORTH: Point3 = Point3::new(0.5, 0.5, 0.9);

fn sphere() -> AnalyticSurface {
    AnalyticSurface::sphere(CENTER, 0.4).unwrap()
}

fn sphere_band(n: usize, eps_cells: f64, reach: usize) -> NarrowBand {
    let h = 1.0 / n as f64;
    let s = sphere();
    // Unit cube padded by 8 cells per side so wide bands fit at coarse h.
    let grid = CartesianGrid::new(Point3::from_element(-8.0 * h), h, [n + 17; 3]);
    let mut band = NarrowBand::build(grid, &s, eps_cells * h, reach).unwrap();
    band.discretize_target(&s, &[NORTH], DEFAULT_TARGET_RADIUS_CELLS * h, |_| 0.0)
        .unwrap();
    band
}

fn weno_on_sphere() -> (NarrowBand, SolutionField, SolutionField, TimeMarchConfig) {
    let band = sphere_band(40, 4.0, WENO_REACH);
    let model = HamiltonianModel::eikonal();
    let init = sweep_solve(&band, &model, &SweepConfig::default()).unwrap();
    let cfg = TimeMarchConfig::default();
    let out = steady_state_solve(&band, &model, &init, &cfg).unwrap();
    (band, init, out, cfg)
}

#[test]
fn weno_keeps_targets_and_beats_first_order() {
    let (band, init, out, _) = weno_on_sphere();
    for &(slot, _) in band.targets() {
        assert_eq!(out.values[slot].to_bits(), init.values[slot].to_bits());
    }
    let u = sphere_exact_distance(CENTER, 0.4, NORTH);
    let e0 = l1_band_error(&init.values, &u, &band);
    let e1 = l1_band_error(&out.values, &u, &band);
    assert!(e1 < 0.5 * e0, "WENO {e1} vs first order {e0}");
}

#[test]
fn weno_creates_no_new_maxima() {
    let (band, init, out, cfg) = weno_on_sphere();
    let n = band.band_len();
    let max0 = init.values[..n].iter().copied().fold(f64::MIN, f64::max);
    let max1 = out.values[..n].iter().copied().fold(f64::MIN, f64::max);
    assert!(
        max1 <= max0 + 10.0 * cfg.steady_tol,
        "max {max1} > initial max {max0} (exact max {})",
        0.4 * std::f64::consts::PI
    );
}

/// Per-axis Lax-Friedrichs bound of the eikonal Hamiltonian over a band.
fn eikonal_sigma(band: &NarrowBand) -> [f64; 3] {
    let mut s = [0.0f64; 3];
    for node in band.band_nodes() {
        let b = b_tensor(&node.rec, HamiltonianModel::eikonal().mu).unwrap();
        for (i, si) in s.iter_mut().enumerate() {
            *si = si.max(b.row(i).abs().sum());
        }
    }
    s
}

#[test]
fn l1_estimate_barely_depends_on_band_width() {
    // Both solves share the wider band's dissipation bound, which is valid on
    // both; otherwise the automatic bound grows with the band and the field
    // itself changes.
    let u = sphere_exact_distance(CENTER, 0.4, NORTH);
    let bands = [sphere_band(50, 4.0, 1), sphere_band(50, 6.0, 1)];
    let cfg = SweepConfig {
        lf_sigma: Some(eikonal_sigma(&bands[1])),
        ..SweepConfig::default()
    };
    let errors: Vec<f64> = bands
        .iter()
        .map(|band| {
            let field = sweep_solve(band, &HamiltonianModel::eikonal(), &cfg).unwrap();
            l1_band_error(&field.values, &u, band)
        })
        .collect();
    let rel = (errors[1] - errors[0]).abs() / errors[0];
    assert!(
        rel <= 0.02,
        "L1 at 4h {:.6}, at 6h {:.6}",
        errors[0],
        errors[1]
    );
}

#[test]
fn ghost_closure_reproduces_normal_constant_field() {
    let n = 100;
    let h = 1.0 / n as f64;
    let band = sphere_band(n, 4.0, 1);
    let u = sphere_exact_distance(CENTER, 0.4, NORTH);
    let antipode = Point3::new(0.5, 0.5, 0.1);
    let mut v: Vec<f64> = band.nodes().iter().map(|node| u(&node.rec.cp)).collect();
    let exact = v.clone();
    band.refresh_ghosts(&mut v);
    let mut checked = 0;
    for c in band.closures() {
        let cp = band.nodes()[c.ghost].rec.cp;
        if (cp - antipode).norm() <= 4.0 * h {
            continue;
        }
        checked += 1;
        let err = (v[c.ghost] - exact[c.ghost]).abs();
        assert!(
            err <= 10.0 * h * h,
            "ghost {:?}: error {err:.3e}",
            band.nodes()[c.ghost].index
        );
    }
    assert!(checked > 1000);
}

#[test]
fn records_and_paths_round_trip_through_json() {
    let rec = sphere()
        .closest_point(&Point3::new(0.62, 0.41, 0.83))
        .unwrap();
    let back: ClosestPointRecord =
        serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
    assert_eq!(back, rec);

    let band = sphere_band(40, 4.0, 1);
    let model = HamiltonianModel::eikonal();
    let field = sweep_solve(&band, &model, &SweepConfig::default()).unwrap();
    let s = sphere();
    let path = trace_isotropic(
        &band,
        &s,
        &field,
        &model,
        &s.point_at(2.0, 1.0),
        &PathConfig::default(),
    )
    .unwrap();
    let json = serde_json::to_string(&path).unwrap();
    let back: SurfacePath = serde_json::from_str(&json).unwrap();
    // serde_json's default float parsing may be off by one ulp.
    assert_eq!(back.vertices.len(), path.vertices.len());
    for (a, b) in back.vertices.iter().zip(&path.vertices) {
        assert!((a - b).norm() <= 1e-15);
    }
    assert_eq!(back.terminated, path.terminated);
    assert!((back.length() - path.length()).abs() <= 1e-14);
}
