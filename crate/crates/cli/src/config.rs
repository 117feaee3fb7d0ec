//! Run configuration: a plain `key = value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use surfhjb_core::band::STENCIL_RADIUS_CELLS;
use surfhjb_core::{
    AnalyticSurface, ControlDisc, CostModel, HamiltonianModel, Point3, ScalarField, SpeedModel,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceSpec {
    Sphere {
        center: Point3,
        radius: f64,
    },
    Torus {
        center: Point3,
        major: f64,
        minor: f64,
    },
    /// Point cloud file (XYZ or ASCII PLY) with an optional interior point
    /// used to orient normals.
    Cloud {
        path: PathBuf,
        interior: Option<Point3>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Sweep,
    Weno,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Vtk,
    Ply,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: SurfaceSpec,
    pub h: f64,
    pub eps_cells: f64,
    pub sources: Vec<Point3>,
    /// Exit penalty, constant on the targets.
    pub g: f64,
    pub target_radius_cells: f64,
    pub speed: String,
    pub b: f64,
    pub r: f64,
    pub mu: f64,
    pub n_theta: usize,
    pub solver: Solver,
    pub tol: Option<f64>,
    pub max_sweeps: usize,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: SurfaceSpec::Sphere {
                center: Point3::new(0.5, 0.5, 0.5),
                radius: 0.4,
            },
            h: 0.01,
            eps_cells: 4.0,
            sources: Vec::new(),
            g: 0.0,
            target_radius_cells: surfhjb_core::DEFAULT_TARGET_RADIUS_CELLS,
            speed: "isotropic".into(),
            b: 0.0,
            r: 1.0,
            mu: 1.0,
            n_theta: ControlDisc::default().n_theta,
            solver: Solver::Sweep,
            tol: None,
            max_sweeps: surfhjb_core::SweepConfig::default().max_sweeps,
            out: PathBuf::from("out"),
            formats: vec![Format::Csv],
        }
    }
}

/// Raw settings in application order; later entries override earlier ones
/// except for the repeatable `source` key.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
    sources: Vec<String>,
    formats: Vec<String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{origin}:{}: expected `key = value`, got `{line}`",
                    i + 1
                ))
            })?;
            s.set(k.trim(), v.trim());
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        match key {
            "source" => self.sources.push(value.to_string()),
            "format" => self.formats.push(value.to_string()),
            _ => {
                self.values.insert(key.to_string(), value.to_string());
            }
        }
    }

    /// Overlay `other`; repeatable keys given in `other` replace ours.
    pub fn overlay(&mut self, other: Settings) {
        self.values.extend(other.values);
        if !other.sources.is_empty() {
            self.sources = other.sources;
        }
        if !other.formats.is_empty() {
            self.formats = other.formats;
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn num(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Config(format!("`{key}` must be a number, got `{v}`")))
            })
            .transpose()
    }

    fn count(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    CliError::Config(format!("`{key}` must be a whole number, got `{v}`"))
                })
            })
            .transpose()
    }

    fn point(&self, key: &str) -> Result<Option<Point3>, CliError> {
        self.get(key).map(|v| parse_point(v, key)).transpose()
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::default();
        let center = self.point("center")?.unwrap_or(Point3::new(0.5, 0.5, 0.5));
        c.surface = match (self.get("cloud"), self.get("surface").unwrap_or("sphere")) {
            (Some(path), _) => SurfaceSpec::Cloud {
                path: PathBuf::from(path),
                interior: self.point("cloud.interior")?,
            },
            (None, "sphere") => SurfaceSpec::Sphere {
                center,
                radius: self.num("radius")?.unwrap_or(0.4),
            },
            (None, "torus") => SurfaceSpec::Torus {
                center,
                major: self.num("major")?.unwrap_or(0.25),
                minor: self.num("minor")?.unwrap_or(0.1),
            },
            (None, other) => {
                return Err(CliError::Config(format!(
                    "unknown surface `{other}`; use sphere, torus or --cloud"
                )))
            }
        };
        if let Some(h) = self.num("h")? {
            c.h = h;
        }
        if let Some(e) = self.num("eps_cells")? {
            c.eps_cells = e;
        }
        if let Some(g) = self.num("g")? {
            c.g = g;
        }
        if let Some(r) = self.num("target.radius_cells")? {
            c.target_radius_cells = r;
        }
        if let Some(m) = self.get("speed.model") {
            c.speed = m.to_string();
        }
        if let Some(b) = self.num("speed.b")? {
            c.b = b;
        }
        if let Some(r) = self.num("cost.r")? {
            c.r = r;
        }
        if let Some(mu) = self.num("mu")? {
            c.mu = mu;
        }
        if let Some(n) = self.count("controls.n_theta")? {
            c.n_theta = n;
        }
        c.solver = match self.get("solver").unwrap_or("sweep") {
            "sweep" => Solver::Sweep,
            "weno" => Solver::Weno,
            other => {
                return Err(CliError::Config(format!(
                    "unknown solver `{other}`; use sweep or weno"
                )))
            }
        };
        c.tol = self.num("sweep.tol")?;
        if let Some(n) = self.count("sweep.max_sweeps")? {
            c.max_sweeps = n;
        }
        if let Some(o) = self.get("out") {
            c.out = PathBuf::from(o);
        }
        if !self.formats.is_empty() {
            c.formats = self
                .formats
                .iter()
                .map(|f| parse_format(f))
                .collect::<Result<_, _>>()?;
            c.formats.sort();
            c.formats.dedup();
        }
        c.sources = self
            .sources
            .iter()
            .map(|s| parse_point(s, "source"))
            .collect::<Result<_, _>>()?;
        c.validate()?;
        Ok(c)
    }
}

pub fn parse_point(v: &str, key: &str) -> Result<Point3, CliError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let bad = || CliError::Config(format!("`{key}` must be `x,y,z`, got `{v}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut xyz = [0.0; 3];
    for (x, p) in xyz.iter_mut().zip(&parts) {
        *x = p.parse().map_err(|_| bad())?;
    }
    Ok(Point3::new(xyz[0], xyz[1], xyz[2]))
}

pub fn parse_interval(v: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("interval must be `lo,hi`, got `{v}`"));
    let (lo, hi) = v.split_once(',').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_format(v: &str) -> Result<Format, CliError> {
    match v {
        "csv" => Ok(Format::Csv),
        "vtk" => Ok(Format::Vtk),
        "ply" => Ok(Format::Ply),
        other => Err(CliError::Config(format!(
            "unknown format `{other}`; use csv, vtk or ply"
        ))),
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.h > 0.0 && self.h <= 0.5) {
            return Err(CliError::Config(format!(
                "h = {} must lie in (0, 0.5]",
                self.h
            )));
        }
        if !(self.eps_cells > STENCIL_RADIUS_CELLS) {
            return Err(CliError::Config(format!(
                "eps_cells = {} must exceed 2*sqrt(3) = {STENCIL_RADIUS_CELLS:.4} so interpolation stencils fit in the band",
                self.eps_cells
            )));
        }
        if !(self.target_radius_cells > 0.0) {
            return Err(CliError::Config(
                "target.radius_cells must be positive".into(),
            ));
        }
        if !(self.r > 0.0) {
            return Err(CliError::Config(format!(
                "cost.r = {} must be positive",
                self.r
            )));
        }
        self.model()?;
        Ok(())
    }

    pub fn model(&self) -> Result<HamiltonianModel, CliError> {
        let speed = match self.speed.as_str() {
            "isotropic" => SpeedModel::Isotropic(ScalarField::Constant(1.0)),
            "curvature" => SpeedModel::CurvatureAniso { b: self.b },
            other => {
                return Err(CliError::Config(format!(
                    "unknown speed model `{other}`; use isotropic or curvature"
                )))
            }
        };
        let model = HamiltonianModel {
            speed,
            cost: CostModel {
                r: ScalarField::Constant(self.r),
                g: ScalarField::Constant(self.g),
            },
            controls: ControlDisc::new(self.n_theta)
                .map_err(|e| CliError::Config(e.to_string()))?,
            mu: self.mu,
        };
        model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(model)
    }

    pub fn analytic(&self) -> Option<AnalyticSurface> {
        match self.surface {
            SurfaceSpec::Sphere { center, radius } => AnalyticSurface::sphere(center, radius).ok(),
            SurfaceSpec::Torus {
                center,
                major,
                minor,
            } => AnalyticSurface::torus(center, major, minor).ok(),
            SurfaceSpec::Cloud { .. } => None,
        }
    }
}
