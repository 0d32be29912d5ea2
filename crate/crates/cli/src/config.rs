//! Experiment configuration files.
//!
//! The format is flat `key = value` lines grouped under `[section]` headers.
//! Lines starting with `#` are comments. Every key must be declared in
//! [`SCHEMA`]; values missing from a file fall back to the preset of the
//! subcommand being run.

use std::collections::BTreeMap;
use std::fmt;

use gpmle::experiments::{Column, Design, ExperimentConfig, FitSubsequence};
use gpmle::kernels::{FunctionExpansion, KernelSpec};

/// `(section, key, meaning)` for every accepted key.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    (
        "kernel",
        "family",
        "matern, brownian_motion or released_ibm",
    ),
    ("kernel", "nu", "Matérn smoothness"),
    ("kernel", "lengthscale", "Matérn length-scale"),
    ("kernel", "dim", "input dimension (1 or 2)"),
    (
        "kernel",
        "sigma",
        "fixed kernel scale used by the fixed-sigma score",
    ),
    (
        "function",
        "eta",
        "smoothness of the Matérn test-function terms",
    ),
    (
        "function",
        "lengthscale",
        "length-scale of the test-function terms",
    ),
    ("function", "coefficients", "comma-separated term weights"),
    (
        "function",
        "centers",
        "term centres; points separated by ';', coordinates by ','",
    ),
    (
        "design",
        "kind",
        "uniform_grid, van_der_corput, cartesian_grid or cartesian_vdc",
    ),
    (
        "design",
        "n",
        "sizes: 'a..=b', 'a..b', a comma list, or one value (per axis for cartesian designs)",
    ),
    (
        "analysis",
        "geometry_resolution",
        "lattice resolution for fill distance and sup error",
    ),
    (
        "analysis",
        "quadrature_tol",
        "absolute tolerance for kernel means and true integrals",
    ),
    (
        "analysis",
        "sup_error",
        "also record max |f - s| over the lattice (true/false)",
    ),
    (
        "rates",
        "curve",
        "sweep used by the rates subcommand: mle or cubature",
    ),
    (
        "rates",
        "columns",
        "comma-separated columns whose slopes are reported",
    ),
    (
        "rates",
        "window",
        "fraction of trailing records used for slope fits",
    ),
    (
        "rates",
        "subsequence",
        "records entering slope fits: all, dyadic or auto",
    ),
];

pub const FIG1_PRESET: &str = "\
[kernel]
family = matern
nu = 2
lengthscale = 0.2
dim = 1
sigma = 1

[function]
eta = 0.5
lengthscale = 0.2
coefficients = 1, 0.5, 0.2
centers = 0.2; 0.55; 0.78

[design]
kind = uniform_grid
n = 2..=300

[analysis]
geometry_resolution = 512
quadrature_tol = 1e-12
sup_error = false

[rates]
curve = mle
columns = sigma_ml
window = 0.5
subsequence = auto
";

pub const FIG3_PRESET: &str = "\
[kernel]
family = released_ibm
nu = 1.5
lengthscale = 0.7
dim = 1
sigma = 1

[function]
eta = 0.25
lengthscale = 0.7
coefficients = 1, 2, 0.5
centers = 0.125; 0.5; 0.75

[design]
kind = van_der_corput
n = 2..=256

[analysis]
geometry_resolution = 512
quadrature_tol = 1e-12
sup_error = false

[rates]
curve = cubature
columns = abs_err, sigma_ml, score, fixed_sigma_score
window = 0.6
subsequence = auto
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn declared(section: &str, key: &str) -> bool {
    SCHEMA.iter().any(|(s, k, _)| *s == section && *k == key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Mle,
    Cubature,
}

/// Parsed key-value settings, keyed by `(section, key)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<(String, String), String>,
}

impl Settings {
    /// Parses configuration text; `origin` names the source in messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let at = || format!("{origin}:{}", i + 1);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SCHEMA.iter().any(|(s, _, _)| *s == name) {
                    return err(format!("{}: unknown section [{name}]", at()));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("{}: expected 'key = value', got '{line}'", at()));
            };
            let Some(sec) = &section else {
                return err(format!("{}: key outside of any [section]", at()));
            };
            let key = key.trim();
            if !declared(sec, key) {
                return err(format!("{}: unknown key '{key}' in section [{sec}]", at()));
            }
            let slot = (sec.clone(), key.to_string());
            if out.values.contains_key(&slot) {
                return err(format!("{}: duplicate key '{sec}.{key}'", at()));
            }
            out.values.insert(slot, value.trim().to_string());
        }
        Ok(out)
    }

    /// Applies `key=value` or `section.key=value`; bare keys must be unique
    /// across sections.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((name, value)) = assignment.split_once('=') else {
            return err(format!(
                "override '{assignment}' is not of the form KEY=VALUE"
            ));
        };
        let name = name.trim();
        let slot = match name.split_once('.') {
            Some((sec, key)) => {
                if !declared(sec, key) {
                    return err(format!("unknown config key '{name}'"));
                }
                (sec.to_string(), key.to_string())
            }
            None => {
                let matches: Vec<&str> = SCHEMA
                    .iter()
                    .filter(|(_, k, _)| *k == name)
                    .map(|(s, _, _)| *s)
                    .collect();
                match matches.as_slice() {
                    [] => return err(format!("unknown config key '{name}'")),
                    [sec] => (sec.to_string(), name.to_string()),
                    many => {
                        let options: Vec<String> =
                            many.iter().map(|s| format!("{s}.{name}")).collect();
                        return err(format!(
                            "config key '{name}' is ambiguous; use one of {}",
                            options.join(", ")
                        ));
                    }
                }
            }
        };
        self.values.insert(slot, value.trim().to_string());
        Ok(())
    }

    /// Fills every key not already present from `defaults`.
    pub fn with_defaults(mut self, defaults: &Settings) -> Self {
        for (k, v) in &defaults.values {
            self.values.entry(k.clone()).or_insert_with(|| v.clone());
        }
        self
    }

    pub fn get(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
            .ok_or_else(|| ConfigError(format!("missing config key '{section}.{key}'")))
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(section, key)?;
        raw.parse()
            .map_err(|e| ConfigError(format!("invalid value '{raw}' for {section}.{key}: {e}")))
    }

    fn list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.get(section, key)?;
        parse_numbers(raw)
            .map_err(|e| ConfigError(format!("invalid value '{raw}' for {section}.{key}: {e}")))
    }

    pub fn curve(&self) -> Result<CurveKind, ConfigError> {
        match self.get("rates", "curve")? {
            "mle" => Ok(CurveKind::Mle),
            "cubature" => Ok(CurveKind::Cubature),
            other => err(format!(
                "invalid value '{other}' for rates.curve (expected mle or cubature)"
            )),
        }
    }

    pub fn columns(&self) -> Result<Vec<Column>, ConfigError> {
        self.get("rates", "columns")?
            .split(',')
            .map(|c| c.trim().parse().map_err(ConfigError))
            .collect()
    }

    pub fn kernel(&self) -> Result<KernelSpec, ConfigError> {
        let dim: usize = self.parsed("kernel", "dim")?;
        let spec = match self.get("kernel", "family")? {
            "matern" => KernelSpec::matern(
                self.parsed("kernel", "nu")?,
                self.parsed("kernel", "lengthscale")?,
                dim,
            )
            .map_err(|e| ConfigError(e.to_string()))?,
            "brownian_motion" | "bm" => KernelSpec::brownian_motion(),
            "released_ibm" | "ibm" => KernelSpec::released_ibm(),
            other => {
                return err(format!(
                    "invalid value '{other}' for kernel.family (expected matern, brownian_motion or released_ibm)"
                ))
            }
        };
        if spec.dim() != dim {
            return err(format!(
                "kernel {} requires dim = 1",
                self.get("kernel", "family")?
            ));
        }
        spec.with_sigma(self.parsed("kernel", "sigma")?)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn test_function(&self, dim: usize) -> Result<FunctionExpansion, ConfigError> {
        let centers = self
            .get("function", "centers")?
            .split(';')
            .map(parse_numbers)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError(format!("invalid function.centers: {e}")))?;
        FunctionExpansion::new(
            self.parsed("function", "eta")?,
            self.parsed("function", "lengthscale")?,
            self.list("function", "coefficients")?,
            &centers,
            dim,
        )
        .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let kernel = self.kernel()?;
        let f = self.test_function(kernel.dim())?;
        let design: Design = self.parsed("design", "kind")?;
        let n_range = parse_range(self.get("design", "n")?)?;
        let mut cfg = ExperimentConfig::with_defaults(kernel, f, design, n_range);
        cfg.geometry_resolution = self.parsed("analysis", "geometry_resolution")?;
        cfg.quadrature_tol = self.parsed("analysis", "quadrature_tol")?;
        cfg.sup_error = self.parsed("analysis", "sup_error")?;
        cfg.fit_window = self.parsed("rates", "window")?;
        match self.get("rates", "subsequence")? {
            "auto" => {}
            other => {
                cfg.fit_subsequence = other
                    .parse::<FitSubsequence>()
                    .map_err(|e| ConfigError(format!("rates.subsequence: {e}")))?
            }
        }
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_numbers(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .map_err(|_| format!("'{v}' is not a number"))
        })
        .collect()
}

/// Parses `a..=b`, `a..b`, `a, b, c` or a single size.
pub fn parse_range(raw: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = || ConfigError(format!("invalid size range '{raw}'"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let raw_t = raw.trim();
    if let Some((a, b)) = raw_t.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        return if a <= b {
            Ok((a..=b).collect())
        } else {
            Err(bad())
        };
    }
    if let Some((a, b)) = raw_t.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        return if a < b {
            Ok((a..b).collect())
        } else {
            Err(bad())
        };
    }
    raw_t.split(',').map(num).collect()
}
