//! Deterministic sweeps over nested or non-nested designs.
//!
//! A sweep fits a fresh process for every `n` in the configured range and
//! records the scale estimate, design geometry and, for cubature sweeps, the
//! integration error and its standard score. Records are always returned in
//! range order regardless of how the work was scheduled.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::cubature::{cubature, expansion_integral, CubatureError, Embedding};
use crate::gp::GpFit;
use crate::kernels::{FunctionExpansion, KernelError, KernelSpec};
use crate::pointsets::{
    cartesian_product, default_resolution, geometry, uniform_grid, van_der_corput, PointSet,
    PointSetError,
};

/// Minimum number of records a slope fit accepts.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Points(#[from] PointSetError),
    #[error(transparent)]
    Numerical(#[from] CubatureError),
    #[error("N = {n}: {source}")]
    AtSize {
        n: usize,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("slope fit needs at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("column {column} is not positive at N = {n}; cannot take logarithms")]
    NonPositiveValues { column: Column, n: usize },
    #[error("column {0} was not recorded by this sweep")]
    MissingColumn(Column),
}

impl ExperimentError {
    /// True for errors caused by the configuration rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Self::InvalidConfig(_) | Self::Kernel(_) | Self::Points(_) | Self::MissingColumn(_) => {
                true
            }
            Self::AtSize { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    UniformGrid,
    VanDerCorput,
    /// Product of uniform grids; `n` counts points per axis.
    CartesianGrid,
    /// Product of van der Corput prefixes; `n` counts points per axis.
    CartesianVdc,
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformGrid => "uniform_grid",
            Self::VanDerCorput => "van_der_corput",
            Self::CartesianGrid => "cartesian_grid",
            Self::CartesianVdc => "cartesian_vdc",
        }
    }

    pub fn is_cartesian(&self) -> bool {
        matches!(self, Self::CartesianGrid | Self::CartesianVdc)
    }

    /// The design with `n` points (per axis for Cartesian designs).
    pub fn points(&self, n: usize, dim: usize) -> Result<PointSet, PointSetError> {
        match self {
            Self::UniformGrid if dim == 1 => uniform_grid(n),
            Self::VanDerCorput if dim == 1 => van_der_corput(n),
            Self::UniformGrid | Self::CartesianGrid => cartesian_product(&uniform_grid(n)?, dim),
            Self::VanDerCorput | Self::CartesianVdc => cartesian_product(&van_der_corput(n)?, dim),
        }
    }
}

impl FromStr for Design {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform_grid" | "uniform" | "grid" => Ok(Self::UniformGrid),
            "van_der_corput" | "vdc" => Ok(Self::VanDerCorput),
            "cartesian_grid" => Ok(Self::CartesianGrid),
            "cartesian_vdc" => Ok(Self::CartesianVdc),
            _ => Err(format!(
                "unknown design '{s}' (expected uniform_grid, van_der_corput, cartesian_grid or cartesian_vdc)"
            )),
        }
    }
}

/// Which records enter a slope fit before the tail window is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSubsequence {
    All,
    /// Only sizes that are powers of two. Van der Corput prefixes are
    /// equispaced exactly at these sizes, so the fit skips the sawtooth in
    /// between.
    Dyadic,
}

impl FromStr for FitSubsequence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Self::All),
            "dyadic" => Ok(Self::Dyadic),
            _ => Err(format!(
                "unknown fit subsequence '{s}' (expected all or dyadic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub test_function: FunctionExpansion,
    pub design: Design,
    pub n_range: Vec<usize>,
    pub geometry_resolution: usize,
    pub quadrature_tol: f64,
    /// Fraction of the (filtered) records, taken from the end, used for slopes.
    pub fit_window: f64,
    pub fit_subsequence: FitSubsequence,
    /// Also record `max |f - s|` over the geometry lattice.
    pub sup_error: bool,
}

impl ExperimentConfig {
    /// One-dimensional growth sweep: `ℓ = 0.2`, `η = 0.5`, uniform grids of 2 to 300 points.
    pub fn mle_1d(nu: f64) -> Result<Self, ExperimentError> {
        let f = FunctionExpansion::new(
            0.5,
            0.2,
            vec![1.0, 0.5, 0.2],
            &[vec![0.2], vec![0.55], vec![0.78]],
            1,
        )?;
        Ok(Self::with_defaults(
            KernelSpec::matern(nu, 0.2, 1)?,
            f,
            Design::UniformGrid,
            (2..=300).collect(),
        ))
    }

    /// Two-dimensional growth sweep: `ℓ = 0.8`, `η = 0.75`, grids of 2² to 40² points.
    pub fn mle_2d(nu: f64) -> Result<Self, ExperimentError> {
        let f = FunctionExpansion::new(
            0.75,
            0.8,
            vec![1.0, 0.5, 0.2],
            &[vec![0.1, 0.1], vec![0.5, 0.1], vec![0.725, 0.565]],
            2,
        )?;
        Ok(Self::with_defaults(
            KernelSpec::matern(nu, 0.8, 2)?,
            f,
            Design::CartesianGrid,
            (2..=40).collect(),
        ))
    }

    /// Integration sweep with the released integrated Brownian motion kernel
    /// on van der Corput points, `N = 2..=256`.
    pub fn cubature_ibm(eta: f64) -> Result<Self, ExperimentError> {
        let f = FunctionExpansion::new(
            eta,
            0.7,
            vec![1.0, 2.0, 0.5],
            &[vec![0.125], vec![0.5], vec![0.75]],
            1,
        )?;
        let mut cfg = Self::with_defaults(
            KernelSpec::released_ibm(),
            f,
            Design::VanDerCorput,
            (2..=256).collect(),
        );
        cfg.fit_window = 0.6;
        Ok(cfg)
    }

    pub fn with_defaults(
        kernel: KernelSpec,
        test_function: FunctionExpansion,
        design: Design,
        n_range: Vec<usize>,
    ) -> Self {
        let fit_subsequence = match design {
            Design::VanDerCorput | Design::CartesianVdc => FitSubsequence::Dyadic,
            _ => FitSubsequence::All,
        };
        Self {
            geometry_resolution: default_resolution(kernel.dim()),
            kernel,
            test_function,
            design,
            n_range,
            quadrature_tol: 1e-12,
            fit_window: 0.5,
            fit_subsequence,
            sup_error: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.n_range.is_empty() {
            return bad("n_range is empty".into());
        }
        if self.n_range.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_range must be strictly increasing".into());
        }
        if self.n_range[0] < 2 {
            return bad(format!(
                "n_range must start at 2 or more, got {}",
                self.n_range[0]
            ));
        }
        if self.test_function.dim() != self.kernel.dim() {
            return bad(format!(
                "test function has dimension {} but kernel has dimension {}",
                self.test_function.dim(),
                self.kernel.dim()
            ));
        }
        if self.design.is_cartesian() && self.kernel.dim() == 1 {
            return bad(format!(
                "{} design needs a two-dimensional kernel",
                self.design.name()
            ));
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return bad(format!(
                "fit_window must lie in (0,1], got {}",
                self.fit_window
            ));
        }
        if !(self.quadrature_tol.is_finite() && self.quadrature_tol > 0.0) {
            return bad(format!(
                "quadrature_tol must be positive, got {}",
                self.quadrature_tol
            ));
        }
        Ok(())
    }

    /// The point set for one entry of `n_range`.
    pub fn points(&self, n: usize) -> Result<PointSet, PointSetError> {
        self.design.points(n, self.kernel.dim())
    }
}

/// Integration columns of a cubature sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralRecord {
    pub estimate: f64,
    pub abs_error: f64,
    pub sqrt_v: f64,
    pub width: f64,
    pub score: f64,
    pub fixed_sigma_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    /// Number of points in the design.
    pub n: usize,
    pub sigma_ml: f64,
    pub h: f64,
    pub q: f64,
    pub rho: f64,
    pub sup_error: Option<f64>,
    pub integral: Option<IntegralRecord>,
}

/// A named numeric column of [`CurveRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    SigmaMl,
    SupError,
    AbsIntError,
    SqrtV,
    Width,
    Score,
    FixedSigmaScore,
    FillDistance,
    SeparationRadius,
    MeshRatio,
}

impl Column {
    pub const ALL: [Column; 10] = [
        Self::SigmaMl,
        Self::SupError,
        Self::AbsIntError,
        Self::SqrtV,
        Self::Width,
        Self::Score,
        Self::FixedSigmaScore,
        Self::FillDistance,
        Self::SeparationRadius,
        Self::MeshRatio,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::SigmaMl => "sigma_ml",
            Self::SupError => "sup_error",
            Self::AbsIntError => "abs_err",
            Self::SqrtV => "sqrt_V",
            Self::Width => "R_bc",
            Self::Score => "score",
            Self::FixedSigmaScore => "fixed_sigma_score",
            Self::FillDistance => "h",
            Self::SeparationRadius => "q",
            Self::MeshRatio => "rho",
        }
    }

    pub fn value(&self, r: &CurveRecord) -> Option<f64> {
        let i = r.integral.as_ref();
        match self {
            Self::SigmaMl => Some(r.sigma_ml),
            Self::SupError => r.sup_error,
            Self::AbsIntError => i.map(|i| i.abs_error),
            Self::SqrtV => i.map(|i| i.sqrt_v),
            Self::Width => i.map(|i| i.width),
            Self::Score => i.map(|i| i.score),
            Self::FixedSigmaScore => i.map(|i| i.fixed_sigma_score),
            Self::FillDistance => Some(r.h),
            Self::SeparationRadius => Some(r.q),
            Self::MeshRatio => Some(r.rho),
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown column '{s}'"))
    }
}

/// `(ν - 2η)₊ / d - 1/2`: predicted growth exponent of `σ_ML` for a Matérn-ν
/// kernel and a Matérn-η expansion.
pub fn theoretical_exponent(nu: f64, eta: f64, d: usize) -> f64 {
    rate_exponent(nu + d as f64 / 2.0, 2.0 * eta + d as f64 / 2.0, d)
}

/// `(α - β)₊ / d - 1/2` for kernel order `α` and function smoothness `β`.
pub fn rate_exponent(alpha: f64, beta: f64, d: usize) -> f64 {
    (alpha - beta).max(0.0) / d as f64 - 0.5
}

/// `β = 2η + d/2`.
pub fn smoothness_of_expansion(f: &FunctionExpansion) -> f64 {
    f.smoothness()
}

/// The `σ_ML` exponent predicted for a configuration.
pub fn predicted_sigma_exponent(cfg: &ExperimentConfig) -> f64 {
    rate_exponent(
        cfg.kernel.sobolev_order(),
        cfg.test_function.smoothness(),
        cfg.kernel.dim(),
    )
}

fn annotate(n: usize) -> impl Fn(ExperimentError) -> ExperimentError {
    move |e| ExperimentError::AtSize {
        n,
        source: Box::new(e),
    }
}

fn base_record(
    cfg: &ExperimentConfig,
    x: &PointSet,
) -> Result<(GpFit, CurveRecord), ExperimentError> {
    let f = &cfg.test_function;
    let values: Vec<f64> = x.iter().map(|p| f.eval(p)).collect::<Result<_, _>>()?;
    let fit = GpFit::fit(cfg.kernel, x, &values).map_err(CubatureError::from)?;
    let g = geometry(x, cfg.geometry_resolution)?;
    let sup_error = if cfg.sup_error {
        Some(sup_error(&fit, f, cfg.geometry_resolution)?)
    } else {
        None
    };
    let record = CurveRecord {
        n: x.len(),
        sigma_ml: fit.sigma_ml(),
        h: g.fill_distance,
        q: g.separation_radius,
        rho: g.mesh_ratio,
        sup_error,
        integral: None,
    };
    Ok((fit, record))
}

/// `max |f - s|` over the lattice `{i / resolution}^d`.
fn sup_error(
    fit: &GpFit,
    f: &FunctionExpansion,
    resolution: usize,
) -> Result<f64, ExperimentError> {
    let dim = fit.spec().dim();
    let step = 1.0 / resolution as f64;
    let side = resolution + 1;
    let errors = (0..side.pow(dim as u32))
        .into_par_iter()
        .map(|c| {
            let x: Vec<f64> = if dim == 1 {
                vec![c as f64 * step]
            } else {
                vec![(c / side) as f64 * step, (c % side) as f64 * step]
            };
            let s = fit.mean(&x).map_err(CubatureError::from)?;
            Ok((f.eval(&x)? - s).abs())
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

/// One record per `n`, carrying `σ_ML` and the design geometry.
pub fn run_mle_curve(cfg: &ExperimentConfig) -> Result<Vec<CurveRecord>, ExperimentError> {
    cfg.validate()?;
    cfg.n_range
        .par_iter()
        .map(|&n| {
            let x = cfg.points(n).map_err(|e| annotate(n)(e.into()))?;
            base_record(cfg, &x)
                .map(|(_, r)| r)
                .map_err(annotate(x.len()))
        })
        .collect()
}

/// One record per `n`, adding the cubature estimate, its error against the
/// quadrature value of the true integral, and the standard scores.
pub fn run_cubature_curve(cfg: &ExperimentConfig) -> Result<Vec<CurveRecord>, ExperimentError> {
    cfg.validate()?;
    let emb = Embedding::new(&cfg.kernel, cfg.quadrature_tol)?;
    let truth = expansion_integral(&cfg.test_function, cfg.quadrature_tol)?;
    cfg.n_range
        .par_iter()
        .map(|&n| {
            let x = cfg.points(n).map_err(|e| annotate(n)(e.into()))?;
            let step = || -> Result<CurveRecord, ExperimentError> {
                let (fit, mut record) = base_record(cfg, &x)?;
                let r = cubature(&fit, &emb, Some(truth))?;
                record.integral = Some(IntegralRecord {
                    estimate: r.mean,
                    abs_error: (truth - r.mean).abs(),
                    sqrt_v: r.variance.sqrt(),
                    width: r.width,
                    score: r.score.expect("true integral supplied"),
                    fixed_sigma_score: r.fixed_sigma_score.expect("true integral supplied"),
                });
                Ok(record)
            };
            step().map_err(annotate(x.len()))
        })
        .collect()
}

/// Least-squares line through `(log N, log value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of records used.
    pub count: usize,
}

/// Fits the last `window` fraction of all records.
pub fn fit_rate(
    records: &[CurveRecord],
    column: Column,
    window: f64,
) -> Result<RateFit, ExperimentError> {
    fit_rate_with(records, column, window, FitSubsequence::All)
}

/// Fits the last `window` fraction of the records selected by `subsequence`.
pub fn fit_rate_with(
    records: &[CurveRecord],
    column: Column,
    window: f64,
    subsequence: FitSubsequence,
) -> Result<RateFit, ExperimentError> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "fit window must lie in (0,1], got {window}"
        )));
    }
    let selected: Vec<&CurveRecord> = records
        .iter()
        .filter(|r| subsequence == FitSubsequence::All || r.n.is_power_of_two())
        .collect();
    let take = ((window * selected.len() as f64).ceil() as usize).min(selected.len());
    let tail = &selected[selected.len() - take..];
    if tail.len() < MIN_FIT_POINTS {
        return Err(ExperimentError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: tail.len(),
        });
    }
    let mut xs = Vec::with_capacity(tail.len());
    let mut ys = Vec::with_capacity(tail.len());
    for r in tail {
        let v = column
            .value(r)
            .ok_or(ExperimentError::MissingColumn(column))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(ExperimentError::NonPositiveValues { column, n: r.n });
        }
        xs.push((r.n as f64).ln());
        ys.push(v.ln());
    }
    Ok(least_squares(&xs, &ys))
}

fn least_squares(xs: &[f64], ys: &[f64]) -> RateFit {
    let n = xs.len() as f64;
    // Shifting by the first value keeps a constant column exactly flat.
    let y0 = ys[0];
    let ys: Vec<f64> = ys.iter().map(|y| y - y0).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let shifted_intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - shifted_intercept - slope * x;
            e * e
        })
        .sum();
    let intercept = shifted_intercept + y0;
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    RateFit {
        slope,
        intercept,
        r2,
        count: xs.len(),
    }
}
