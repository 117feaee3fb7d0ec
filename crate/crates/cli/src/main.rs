//! `surfhjb`: solve, trace and sort on surfaces from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_interval, parse_point, RunConfig, Settings};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "surfhjb",
    version,
    about = "Narrow-band HJB solvers on closed surfaces"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the value function and write the field.
    Solve {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve, then trace optimal paths from the given starts.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        /// Start point `x,y,z` (repeatable).
        #[arg(long = "start", value_name = "X,Y,Z")]
        starts: Vec<String>,
    },
    /// Solve, then label points by value interval.
    Belts {
        #[command(flatten)]
        run: RunArgs,
        /// Value interval `lo,hi` (repeatable).
        #[arg(long = "interval", value_name = "LO,HI")]
        intervals: Vec<String>,
        /// Points to label; defaults to the cloud given by `--cloud`.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Error table over a sequence of grid spacings (sphere only).
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated grid spacings, coarsest first.
        #[arg(long = "h-list", value_name = "H1,H2,...", value_delimiter = ',')]
        h_list: Vec<f64>,
    },
    /// Sample an analytic surface and write an XYZ point cloud.
    MakeCloud {
        #[arg(long, default_value = "sphere")]
        surface: String,
        #[arg(long, value_name = "X,Y,Z")]
        center: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        major: Option<f64>,
        #[arg(long)]
        minor: Option<f64>,
        /// Number of points.
        #[arg(long)]
        n: usize,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run settings shared by the solving commands. Flags override the config file.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Analytic surface: sphere or torus.
    #[arg(long)]
    surface: Option<String>,
    /// Point cloud file (XYZ or ASCII PLY); overrides `--surface`.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Interior point used to orient cloud normals.
    #[arg(long, value_name = "X,Y,Z")]
    interior: Option<String>,
    #[arg(long, value_name = "X,Y,Z")]
    center: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    major: Option<f64>,
    #[arg(long)]
    minor: Option<f64>,
    /// Grid spacing on the unit cube.
    #[arg(long)]
    h: Option<f64>,
    /// Band half-width in units of h.
    #[arg(long)]
    eps_cells: Option<f64>,
    /// Point source `x,y,z` (repeatable).
    #[arg(long = "source", value_name = "X,Y,Z")]
    sources: Vec<String>,
    /// Exit penalty on the targets.
    #[arg(long)]
    g: Option<f64>,
    /// Speed model: isotropic or curvature.
    #[arg(long)]
    speed: Option<String>,
    /// Curvature penalty of the curvature speed model.
    #[arg(long)]
    b: Option<f64>,
    /// Running cost.
    #[arg(long)]
    r: Option<f64>,
    /// Weight of the normal direction in the band metric.
    #[arg(long)]
    mu: Option<f64>,
    /// Number of sampled control directions.
    #[arg(long)]
    ntheta: Option<usize>,
    /// Solver: sweep or weno.
    #[arg(long)]
    solver: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv, vtk or ply (repeatable).
    #[arg(long = "format")]
    formats: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut settings = match &self.config {
            Some(p) => Settings::read(p)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.set(k, &v);
            }
        };
        put("surface", self.surface.clone());
        put(
            "cloud",
            self.cloud.as_ref().map(|p| p.display().to_string()),
        );
        put("cloud.interior", self.interior.clone());
        put("center", self.center.clone());
        put("radius", self.radius.map(|x| x.to_string()));
        put("major", self.major.map(|x| x.to_string()));
        put("minor", self.minor.map(|x| x.to_string()));
        put("h", self.h.map(|x| x.to_string()));
        put("eps_cells", self.eps_cells.map(|x| x.to_string()));
        put("g", self.g.map(|x| x.to_string()));
        put("speed.model", self.speed.clone());
        put("speed.b", self.b.map(|x| x.to_string()));
        put("cost.r", self.r.map(|x| x.to_string()));
        put("mu", self.mu.map(|x| x.to_string()));
        put("controls.n_theta", self.ntheta.map(|x| x.to_string()));
        put("solver", self.solver.clone());
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        for s in &self.sources {
            flags.set("source", s);
        }
        for f in &self.formats {
            flags.set("format", f);
        }
        settings.overlay(flags);
        settings.resolve()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { run } => commands::cmd_solve(&run.resolve()?),
        Command::Trace { run, starts } => {
            let starts = starts
                .iter()
                .map(|s| parse_point(s, "start"))
                .collect::<Result<Vec<_>, _>>()?;
            commands::cmd_trace(&run.resolve()?, &starts)
        }
        Command::Belts {
            run,
            intervals,
            points,
        } => {
            let intervals = intervals
                .iter()
                .map(|s| parse_interval(s))
                .collect::<Result<Vec<_>, _>>()?;
            commands::cmd_belts(&run.resolve()?, points.as_deref(), &intervals)
        }
        Command::Convergence { run, h_list } => commands::cmd_convergence(&run.resolve()?, &h_list),
        Command::MakeCloud {
            surface,
            center,
            radius,
            major,
            minor,
            n,
            out,
        } => {
            let args = RunArgs {
                surface: Some(surface),
                center,
                radius,
                major,
                minor,
                ..RunArgs::default()
            };
            let cfg = args.resolve()?;
            let s = cfg
                .analytic()
                .ok_or_else(|| CliError::Config("invalid surface parameters".into()))?;
            commands::cmd_make_cloud(&s, n, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
