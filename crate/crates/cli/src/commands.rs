use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use surfhjb_core::export::{
    write_belts_csv, write_field_csv, write_field_vtk, write_path_csv, write_paths_ply,
};
use surfhjb_core::metrics::{
    l1_band_error, linf_surface_error, sphere_exact_distance, write_convergence_csv,
};
use surfhjb_core::pointcloud::{read_ply, read_xyz, sampling, write_xyz};
use surfhjb_core::solver_sweep::residual;
use surfhjb_core::solver_weno::WENO_REACH;
use surfhjb_core::{
    belt_sort, steady_state_solve, sweep_solve, trace_anisotropic, trace_isotropic,
    AnalyticSurface, CartesianGrid, ClosestPointMap, ClosestPointRecord, CloudSurface, ErrorReport,
    GeometryError, HamiltonianModel, NarrowBand, Orientation, PathConfig, Point3, PointCloud,
    SolutionField, SurfacePath, SweepConfig, TimeMarchConfig, Vec3,
};

use crate::config::{Format, RunConfig, Solver, SurfaceSpec};
use crate::error::CliError;

pub enum Surface {
    Analytic(AnalyticSurface),
    Cloud(CloudSurface),
}

impl ClosestPointMap for Surface {
    fn closest_point(&self, z: &Point3) -> Result<ClosestPointRecord, GeometryError> {
        match self {
            Surface::Analytic(s) => s.closest_point(z),
            Surface::Cloud(s) => s.closest_point(z),
        }
    }

    fn closest_points(&self, zs: &[Point3]) -> Vec<Result<ClosestPointRecord, GeometryError>> {
        match self {
            Surface::Analytic(s) => s.closest_points(zs),
            Surface::Cloud(s) => s.closest_points(zs),
        }
    }

    fn coarse_distance(&self, z: &Point3) -> Option<f64> {
        match self {
            Surface::Analytic(s) => s.coarse_distance(z),
            Surface::Cloud(s) => s.coarse_distance(z),
        }
    }

    fn coarse_distance_hint(&self) -> Option<f64> {
        match self {
            Surface::Analytic(s) => s.coarse_distance_hint(),
            Surface::Cloud(s) => s.coarse_distance_hint(),
        }
    }
}

/// Surface, band and model ready for solving.
pub struct Prepared {
    pub surface: Surface,
    pub analytic: Option<AnalyticSurface>,
    pub band: NarrowBand,
    pub model: HamiltonianModel,
    pub sources: Vec<Point3>,
}

fn load_points(path: &Path) -> Result<Vec<Point3>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let reader = BufReader::new(file);
    let is_ply = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    Ok(if is_ply {
        read_ply(reader)?
    } else {
        read_xyz(reader)?
    })
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let model = cfg.model()?;
    let h = cfg.h;
    let eps = cfg.eps_cells * h;
    let analytic = match &cfg.surface {
        SurfaceSpec::Cloud { .. } => None,
        _ => Some(
            cfg.analytic()
                .ok_or_else(|| CliError::Config("invalid surface parameters".into()))?,
        ),
    };
    let surface = match (&cfg.surface, analytic) {
        (SurfaceSpec::Cloud { path, interior }, _) => {
            let cloud = PointCloud::new(load_points(path)?)?;
            let orientation = interior.map_or(Orientation::Propagate, Orientation::InteriorPoint);
            log::info!(
                "loaded {} cloud points from {}",
                cloud.len(),
                path.display()
            );
            Surface::Cloud(CloudSurface::new(cloud, orientation, h, eps + 6.0 * h))
        }
        (_, Some(s)) => Surface::Analytic(s),
        (_, None) => unreachable!(),
    };
    let sources = if !cfg.sources.is_empty() {
        cfg.sources.clone()
    } else {
        match analytic {
            Some(AnalyticSurface::Sphere { center, radius }) => {
                vec![center + Point3::new(0.0, 0.0, radius)]
            }
            Some(s @ AnalyticSurface::Torus { .. }) => vec![s.point_at(0.0, 0.0)],
            None => {
                return Err(CliError::Config(
                    "a point cloud needs at least one --source".into(),
                ))
            }
        }
    };
    let reach = if cfg.solver == Solver::Weno {
        WENO_REACH
    } else {
        1
    };
    let (lo, hi) = bounding_box(&surface);
    let grid = covering_grid(lo, hi, h, eps + (reach + 3) as f64 * h);
    let mut band = NarrowBand::build(grid, &surface, eps, reach)?;
    band.discretize_target(&surface, &sources, cfg.target_radius_cells * h, |_| cfg.g)?;
    log::info!(
        "band: {} nodes, {} ghosts, {} target nodes (h = {h}, eps = {eps})",
        band.band_len(),
        band.ghost_len(),
        band.targets().len()
    );
    if let Surface::Cloud(c) = &surface {
        let poor = c.poor_patch_count();
        if poor > 0 {
            log::warn!(
                "{poor} local patch fits had residuals above the mean sample spacing {:.3e}; the cloud may be too sparse for h = {h}",
                c.cloud().mean_spacing()
            );
        }
        let spacing = c.cloud().mean_spacing();
        if spacing > h {
            log::warn!(
                "mean cloud spacing {spacing:.3e} exceeds h = {h}; local patches span several cells and the closest point map will be coarse"
            );
        }
    }
    Ok(Prepared {
        surface,
        analytic,
        band,
        model,
        sources,
    })
}

fn bounding_box(surface: &Surface) -> (Point3, Point3) {
    match surface {
        Surface::Analytic(AnalyticSurface::Sphere { center, radius }) => (
            center - Vec3::repeat(*radius),
            center + Vec3::repeat(*radius),
        ),
        Surface::Analytic(AnalyticSurface::Torus {
            center,
            major,
            minor,
        }) => {
            let e = Vec3::new(major + minor, major + minor, *minor);
            (center - e, center + e)
        }
        Surface::Cloud(c) => {
            let pts = c.cloud().points();
            pts.iter()
                .fold((pts[0], pts[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)))
        }
    }
}

/// Grid of spacing `h` covering `[lo - pad, hi + pad]`, with nodes on integer
/// multiples of `h` so that runs at the same `h` share node positions.
fn covering_grid(lo: Point3, hi: Point3, h: f64, pad: f64) -> CartesianGrid {
    let first = (lo - Vec3::repeat(pad)).map(|x| (x / h).floor());
    let last = (hi + Vec3::repeat(pad)).map(|x| (x / h).ceil());
    let dims = [0, 1, 2].map(|a| (last[a] - first[a]) as usize + 1);
    CartesianGrid::new(first * h, h, dims)
}

pub fn solve(cfg: &RunConfig, prep: &Prepared) -> Result<SolutionField, CliError> {
    let sweep_cfg = SweepConfig {
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
        ..SweepConfig::default()
    };
    let first = sweep_solve(&prep.band, &prep.model, &sweep_cfg)?;
    log::info!(
        "sweep solve: {} iterations, last change {:.3e}",
        first.sweeps,
        first.last_change
    );
    match cfg.solver {
        Solver::Sweep => Ok(first),
        Solver::Weno => {
            let field =
                steady_state_solve(&prep.band, &prep.model, &first, &TimeMarchConfig::default())?;
            log::info!(
                "time marching: {} steps, rate {:.3e}",
                field.sweeps,
                field.last_change
            );
            Ok(field)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(CliError::io(path))?,
    ))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out).map_err(CliError::io(&cfg.out))?;
    Ok(cfg.out.clone())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    writeln!(w).map_err(CliError::io(path))
}

/// Error against the great-circle distance when the surface is an analytic
/// sphere with a single point source.
fn sphere_report(prep: &Prepared, values: &[f64]) -> Result<Option<ErrorReport>, CliError> {
    let (Some(AnalyticSurface::Sphere { center, radius }), [src]) =
        (prep.analytic, prep.sources.as_slice())
    else {
        return Ok(None);
    };
    let u = sphere_exact_distance(center, radius, *src);
    let samples = sampling::sphere(center, radius, 2000);
    Ok(Some(ErrorReport {
        l1: l1_band_error(values, &u, &prep.band),
        linf: linf_surface_error(values, &u, &prep.band, &samples)?,
        h: prep.band.h(),
        eps: prep.band.eps(),
        node_count: prep.band.band_len(),
    }))
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let prep = prepare(cfg)?;
    let field = solve(cfg, &prep)?;
    let dir = out_dir(cfg)?;
    let values = field.band_values(&prep.band);
    for f in &cfg.formats {
        match f {
            Format::Csv => {
                let p = dir.join("field.csv");
                write_field_csv(create(&p)?, &prep.band, values).map_err(CliError::io(&p))?;
            }
            Format::Vtk => {
                let p = dir.join("field.vtk");
                write_field_vtk(create(&p)?, &prep.band, values).map_err(CliError::io(&p))?;
            }
            Format::Ply => log::warn!("ply output applies to paths only; skipped for fields"),
        }
    }
    let res = residual(&prep.band, &field, &prep.model)?;
    let log = json!({
        "solver": match cfg.solver { Solver::Sweep => "sweep", Solver::Weno => "weno" },
        "iterations": field.sweeps,
        "last_change": field.last_change,
        "residual": res,
        "band_nodes": prep.band.band_len(),
        "ghost_nodes": prep.band.ghost_len(),
        "target_nodes": prep.band.targets().len(),
        "h": prep.band.h(),
        "eps": prep.band.eps(),
    });
    write_json(&dir.join("solve.json"), &log)?;
    println!(
        "solved {} band nodes in {} iterations (residual {res:.3e})",
        prep.band.band_len(),
        field.sweeps
    );
    if let Some(report) = sphere_report(&prep, values)? {
        let v = serde_json::to_value(report).expect("report serializes");
        write_json(&dir.join("error.json"), &v)?;
        println!("L1 error {:.6}, Linf error {:.6}", report.l1, report.linf);
    }
    Ok(())
}

pub fn cmd_trace(cfg: &RunConfig, starts: &[Point3]) -> Result<(), CliError> {
    if starts.is_empty() {
        return Err(CliError::Config(
            "trace needs at least one --start x,y,z".into(),
        ));
    }
    let prep = prepare(cfg)?;
    let field = solve(cfg, &prep)?;
    let dir = out_dir(cfg)?;
    let path_cfg = PathConfig::default();
    let mut paths: Vec<SurfacePath> = Vec::with_capacity(starts.len());
    for (k, start) in starts.iter().enumerate() {
        let path = if prep.model.speed.is_isotropic() {
            trace_isotropic(
                &prep.band,
                &prep.surface,
                &field,
                &prep.model,
                start,
                &path_cfg,
            )?
        } else {
            trace_anisotropic(
                &prep.band,
                &prep.surface,
                &field,
                &prep.model,
                start,
                &path_cfg,
            )?
        };
        let v0 = prep
            .band
            .interpolate(&field.values, start)
            .unwrap_or(f64::NAN);
        println!(
            "path {k}: length {:.6}, cost {:.6}, value at start {v0:.6}, {:?}",
            path.length(),
            path.cost,
            path.terminated
        );
        if cfg.formats.contains(&Format::Csv) {
            let p = dir.join(format!("path_{k}.csv"));
            write_path_csv(create(&p)?, &path).map_err(CliError::io(&p))?;
        }
        paths.push(path);
    }
    if cfg.formats.contains(&Format::Ply) {
        let p = dir.join("paths.ply");
        write_paths_ply(create(&p)?, &paths).map_err(CliError::io(&p))?;
    }
    if cfg.formats.contains(&Format::Vtk) {
        log::warn!("vtk output applies to fields only; skipped for paths");
    }
    Ok(())
}

pub fn cmd_belts(
    cfg: &RunConfig,
    points: Option<&Path>,
    intervals: &[(f64, f64)],
) -> Result<(), CliError> {
    if intervals.is_empty() {
        return Err(CliError::Config(
            "belts needs at least one --interval lo,hi".into(),
        ));
    }
    let pts = match (points, &cfg.surface) {
        (Some(p), _) => load_points(p)?,
        (None, SurfaceSpec::Cloud { path, .. }) => load_points(path)?,
        (None, _) => {
            return Err(CliError::Config(
                "belts needs --points or a --cloud surface".into(),
            ))
        }
    };
    let prep = prepare(cfg)?;
    let field = solve(cfg, &prep)?;
    let labels = belt_sort(&prep.band, &field.values, &pts, intervals)?;
    let dir = out_dir(cfg)?;
    let p = dir.join("belts.csv");
    write_belts_csv(create(&p)?, &pts, &labels).map_err(CliError::io(&p))?;
    for (k, (lo, hi)) in intervals.iter().enumerate() {
        let n = labels.iter().filter(|l| **l == Some(k)).count();
        println!("belt {k} [{lo}, {hi}]: {n} points");
    }
    Ok(())
}

pub fn cmd_convergence(cfg: &RunConfig, hs: &[f64]) -> Result<(), CliError> {
    if hs.is_empty() {
        return Err(CliError::Config(
            "convergence needs a list of grid spacings".into(),
        ));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config(
            "grid spacings must be strictly decreasing".into(),
        ));
    }
    if !matches!(cfg.surface, SurfaceSpec::Sphere { .. }) || cfg.sources.len() > 1 {
        return Err(CliError::Config(
            "convergence studies need a sphere with a single source".into(),
        ));
    }
    let mut runs = Vec::new();
    let mut failures = 0;
    for &h in hs {
        let row = RunConfig { h, ..cfg.clone() };
        let result = prepare(&row).and_then(|prep| {
            let field = solve(&row, &prep)?;
            sphere_report(&prep, field.band_values(&prep.band))
        });
        match result {
            Ok(Some(report)) => runs.push(report),
            Ok(None) => unreachable!("sphere with one source always has a report"),
            Err(e) => {
                failures += 1;
                eprintln!("h = {h}: {e}");
            }
        }
    }
    let dir = out_dir(cfg)?;
    let p = dir.join("convergence.csv");
    let mut w = create(&p)?;
    write_convergence_csv(&mut w, &runs).map_err(CliError::io(&p))?;
    w.flush().map_err(CliError::io(&p))?;
    let mut table = Vec::new();
    write_convergence_csv(&mut table, &runs).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&table));
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} of {} rows failed",
            hs.len()
        )));
    }
    Ok(())
}

pub fn cmd_make_cloud(surface: &AnalyticSurface, n: usize, out: &Path) -> Result<(), CliError> {
    if n < surfhjb_core::pointcloud::MIN_CLOUD_POINTS {
        return Err(CliError::Config(format!(
            "n = {n} is below the minimum of {} points",
            surfhjb_core::pointcloud::MIN_CLOUD_POINTS
        )));
    }
    let pts = match *surface {
        AnalyticSurface::Sphere { center, radius } => sampling::sphere(center, radius, n),
        AnalyticSurface::Torus {
            center,
            major,
            minor,
        } => sampling::torus(center, major, minor, n),
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    let mut w = create(out)?;
    write_xyz(&mut w, &pts).map_err(CliError::io(out))?;
    w.flush().map_err(CliError::io(out))?;
    println!("wrote {n} points to {}", out.display());
    Ok(())
}
