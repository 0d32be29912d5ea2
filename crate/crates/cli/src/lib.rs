//! Command-line driver: parses arguments and configuration, runs sweeps and
//! writes CSV tables.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! numerical and I/O failures.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use gpmle::experiments::{
    fit_rate_with, predicted_sigma_exponent, run_cubature_curve, run_mle_curve, Column,
    CurveRecord, Design, ExperimentConfig, ExperimentError, FitSubsequence,
};
use gpmle::kernels::KernelSpec;
use gpmle::pointsets::{default_resolution, geometry};

use config::{parse_range, ConfigError, CurveKind, Settings, FIG1_PRESET, FIG3_PRESET};
use output::{emit, format_float, format_significant, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Numerical(_) | Self::Io(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_config_error() {
            Self::Config(e.to_string())
        } else {
            Self::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gpmle",
    version,
    about = "Gaussian process scale estimation and Bayesian cubature sweeps"
)]
struct Cli {
    /// Configuration file (sections kernel, function, design, analysis, rates).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the CSV table here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override a configuration value; repeatable, applied in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scale estimate and design geometry for each N.
    MleCurve,
    /// Cubature error, scale estimate and standard score for each N.
    CubatureCurve,
    /// Fill distance, separation radius and mesh ratio of a design.
    Geometry(GeometryArgs),
    /// Evaluate a kernel at one pair of points.
    Eval(EvalArgs),
    /// Fitted log-log slopes of a sweep next to their predicted values.
    Rates,
}

#[derive(Debug, Args)]
struct GeometryArgs {
    /// uniform_grid, van_der_corput (vdc), cartesian_grid or cartesian_vdc.
    #[arg(long)]
    design: String,
    /// Sizes: 'a..=b', 'a..b', a comma list or one value.
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Lattice resolution for the fill distance (default 512 in 1-d, 256 in 2-d).
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// matern, brownian_motion (bm) or released_ibm (ibm).
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long = "l", alias = "lengthscale")]
    lengthscale: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// First point, comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Second point, comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    y: String,
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code. Tables go to `stdout` unless `--out` is given.
pub fn parse_and_dispatch<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let reads_config = matches!(
        cli.command,
        Command::MleCurve | Command::CubatureCurve | Command::Rates
    );
    if !reads_config && (cli.config.is_some() || !cli.set.is_empty()) {
        return Err(CliError::Usage(
            "--config and --set apply only to mle-curve, cubature-curve and rates".into(),
        ));
    }
    if let Command::Eval(args) = &cli.command {
        if cli.out.is_some() {
            return Err(CliError::Usage(
                "eval prints to standard output; --out is not accepted".into(),
            ));
        }
        let value = eval_kernel(args)?;
        writeln!(stdout, "{}", format_significant(value, 9))
            .map_err(|e| CliError::Io(e.to_string()))?;
        return Ok(());
    }
    let settings = if reads_config {
        Some(load_settings(&cli)?)
    } else {
        None
    };
    let compute = || -> Result<Table, CliError> {
        match &cli.command {
            Command::MleCurve => mle_table(settings.as_ref().expect("settings loaded")),
            Command::CubatureCurve => cubature_table(settings.as_ref().expect("settings loaded")),
            Command::Rates => rates_table(settings.as_ref().expect("settings loaded")),
            Command::Geometry(args) => geometry_table(args),
            Command::Eval(_) => unreachable!("handled above"),
        }
    };
    let table = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(compute)?,
        None => compute()?,
    };
    emit(&table, cli.out.as_deref(), stdout).map_err(|e| {
        let target = cli
            .out
            .as_deref()
            .map_or("standard output".into(), |p: &Path| p.display().to_string());
        CliError::Io(format!("writing {target}: {e}"))
    })
}

fn load_settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut user = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Settings::parse(&text, &path.display().to_string())?
        }
        None => Settings::default(),
    };
    for assignment in &cli.set {
        user.apply_override(assignment)?;
    }
    let preset = match cli.command {
        Command::MleCurve => FIG1_PRESET,
        Command::CubatureCurve => FIG3_PRESET,
        _ => match user.curve() {
            Ok(CurveKind::Cubature) => FIG3_PRESET,
            _ => FIG1_PRESET,
        },
    };
    let defaults = Settings::parse(preset, "preset").expect("presets are valid");
    Ok(user.with_defaults(&defaults))
}

fn subsequence_name(s: FitSubsequence) -> &'static str {
    match s {
        FitSubsequence::All => "all",
        FitSubsequence::Dyadic => "dyadic",
    }
}

/// Footer lines with the fitted slope of each column and the predicted
/// `σ_ML` exponent.
fn rate_footer(cfg: &ExperimentConfig, records: &[CurveRecord], columns: &[Column]) -> Vec<String> {
    let mut lines = Vec::new();
    for &c in columns {
        match fit_rate_with(records, c, cfg.fit_window, cfg.fit_subsequence) {
            Ok(f) => lines.push(format!(
                "fit {c} slope={} intercept={} r2={} window={} subsequence={} records={}",
                format_float(f.slope),
                format_float(f.intercept),
                format_float(f.r2),
                format_float(cfg.fit_window),
                subsequence_name(cfg.fit_subsequence),
                f.count
            )),
            Err(e) => lines.push(format!("fit {c} unavailable: {e}")),
        }
    }
    lines.push(format!(
        "theory sigma_ml exponent={}",
        format_float(predicted_sigma_exponent(cfg))
    ));
    lines
}

fn mle_table(settings: &Settings) -> Result<Table, CliError> {
    let cfg = settings.experiment()?;
    let records = run_mle_curve(&cfg)?;
    let mut header = vec!["N", "sigma_ml", "h", "q", "rho"];
    if cfg.sup_error {
        header.push("sup_error");
    }
    let mut table = Table::new(&header);
    for r in &records {
        let mut row = vec![
            r.n.to_string(),
            format_float(r.sigma_ml),
            format_float(r.h),
            format_float(r.q),
            format_float(r.rho),
        ];
        if let Some(e) = r.sup_error {
            row.push(format_float(e));
        }
        table.rows.push(row);
    }
    table.footer = rate_footer(&cfg, &records, &settings.columns()?);
    Ok(table)
}

fn cubature_table(settings: &Settings) -> Result<Table, CliError> {
    let cfg = settings.experiment()?;
    let records = run_cubature_curve(&cfg)?;
    let mut table = Table::new(&["N", "Q", "abs_err", "sigma_ml", "sqrt_V", "R_bc", "score"]);
    for r in &records {
        let i = r.integral.expect("cubature sweeps record integrals");
        table.rows.push(vec![
            r.n.to_string(),
            format_float(i.estimate),
            format_float(i.abs_error),
            format_float(r.sigma_ml),
            format_float(i.sqrt_v),
            format_float(i.width),
            format_float(i.score),
        ]);
    }
    table.footer = rate_footer(&cfg, &records, &settings.columns()?);
    Ok(table)
}

fn rates_table(settings: &Settings) -> Result<Table, CliError> {
    let cfg = settings.experiment()?;
    let curve = settings.curve()?;
    let records = match curve {
        CurveKind::Mle => run_mle_curve(&cfg)?,
        CurveKind::Cubature => run_cubature_curve(&cfg)?,
    };
    let mut table = Table::new(&["name", "slope", "theory", "r2"]);
    for c in settings.columns()? {
        let f = fit_rate_with(&records, c, cfg.fit_window, cfg.fit_subsequence)?;
        let theory = match c {
            Column::SigmaMl => format_float(predicted_sigma_exponent(&cfg)),
            _ => String::new(),
        };
        table.rows.push(vec![
            c.name().to_string(),
            format_float(f.slope),
            theory,
            format_float(f.r2),
        ]);
    }
    table.footer.push(format!(
        "curve={} design={} records={} window={} subsequence={}",
        match curve {
            CurveKind::Mle => "mle",
            CurveKind::Cubature => "cubature",
        },
        cfg.design.name(),
        records.len(),
        format_float(cfg.fit_window),
        subsequence_name(cfg.fit_subsequence)
    ));
    Ok(table)
}

fn geometry_table(args: &GeometryArgs) -> Result<Table, CliError> {
    let design: Design = args.design.parse().map_err(CliError::Usage)?;
    let sizes = parse_range(&args.n)?;
    let resolution = args
        .resolution
        .unwrap_or_else(|| default_resolution(args.dim));
    let mut table = Table::new(&["N", "h", "q", "rho"]);
    for n in sizes {
        let x = design
            .points(n, args.dim)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let g = geometry(&x, resolution).map_err(|e| CliError::Config(e.to_string()))?;
        table.rows.push(vec![
            x.len().to_string(),
            format_float(g.fill_distance),
            format_float(g.separation_radius),
            format_float(g.mesh_ratio),
        ]);
    }
    Ok(table)
}

fn parse_point(raw: &str, name: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--{name}: '{v}' is not a number")))
        })
        .collect()
}

fn eval_kernel(args: &EvalArgs) -> Result<f64, CliError> {
    let x = parse_point(&args.x, "x")?;
    let y = parse_point(&args.y, "y")?;
    let bad = |e: gpmle::kernels::KernelError| CliError::Config(e.to_string());
    let spec = match args.kernel.as_str() {
        "matern" => {
            let nu = args
                .nu
                .ok_or_else(|| CliError::Usage("matern kernel needs --nu".into()))?;
            let ell = args
                .lengthscale
                .ok_or_else(|| CliError::Usage("matern kernel needs --l".into()))?;
            KernelSpec::matern(nu, ell, x.len()).map_err(bad)?
        }
        "brownian_motion" | "bm" => KernelSpec::brownian_motion(),
        "released_ibm" | "ibm" => KernelSpec::released_ibm(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown kernel '{other}' (expected matern, brownian_motion or released_ibm)"
            )))
        }
    };
    let spec = spec.with_sigma(args.sigma).map_err(bad)?;
    spec.eval(&x, &y).map_err(bad)
}
