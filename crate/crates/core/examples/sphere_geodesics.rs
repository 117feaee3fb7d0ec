//! Geodesic distance from the north pole of a sphere, its L1 error against
//! the great-circle distance, and a few traced shortest paths.
//!
//! `cargo run --release --example sphere_geodesics -- 100`

use std::f64::consts::PI;

use surfhjb_core::metrics::{l1_band_error, sphere_exact_distance};
use surfhjb_core::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(50);
    let h = 1.0 / n as f64;
    let center = Point3::new(0.5, 0.5, 0.5);
    let north = Point3::new(0.5, 0.5, 0.9);
    let sphere = AnalyticSurface::sphere(center, 0.4)?;

    let mut band = NarrowBand::build(CartesianGrid::unit_cube(n + 1), &sphere, 4.0 * h, 1)?;
    band.discretize_target(&sphere, &[north], DEFAULT_TARGET_RADIUS_CELLS * h, |_| 0.0)?;
    let model = HamiltonianModel::eikonal();
    let field = sweep_solve(&band, &model, &SweepConfig::default())?;
    let exact = sphere_exact_distance(center, 0.4, north);
    println!(
        "h = {h}: {} band nodes, {} sweeps, L1 error {:.6}",
        band.band_len(),
        field.sweeps,
        l1_band_error(&field.values, &exact, &band)
    );

    for theta in [0.5, 1.5, 2.5] {
        let start = sphere.point_at(theta, 0.25 * PI);
        let path = trace_isotropic(
            &band,
            &sphere,
            &field,
            &model,
            &start,
            &PathConfig::default(),
        )?;
        println!(
            "from theta = {theta}: {:?} after {} vertices, length {:.4} (great circle to the pole {:.4})",
            path.terminated,
            path.vertices.len(),
            path.length(),
            exact(&start)
        );
    }
    Ok(())
}
