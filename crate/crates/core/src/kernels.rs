//! Positive-definite kernels on Ω = [0,1]^d and finite Matérn expansions.
//!
//! Three families are supported:
//!
//! * Matérn with smoothness `nu` and length-scale `ell`, Sobolev order `nu + d/2`;
//! * Brownian motion `min(x, y)` on [0,1], Sobolev order 1;
//! * released once-integrated Brownian motion
//!   `1 + xy + min(x,y)³/3 + |x-y| min(x,y)²/2` on [0,1], Sobolev order 2.
//!
//! Every [`KernelSpec`] carries a scale `sigma`; evaluation returns `sigma² K`.

use thiserror::Error;

use crate::specfun::{self, bessel_k_order_nonneg};

/// Below this scaled distance the Matérn kernel is replaced by its limit value 1.
const MATERN_ZERO_DISTANCE: f64 = 1e-8;
/// Orders closer than this to `p + 1/2` use the closed-form half-integer kernel.
const HALF_INTEGER_TOL: f64 = 1e-12;
const MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("point has {got} coordinates, kernel dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {point:?} lies outside [0,1]^{dim}")]
    OutsideDomain { point: Vec<f64>, dim: usize },
    #[error("{family} kernel is only defined for dimension 1, got {dim}")]
    UnsupportedDimension { family: &'static str, dim: usize },
    #[error("kernel mismatch: {0}")]
    Mismatch(String),
    #[error("invalid function expansion: {0}")]
    InvalidExpansion(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    nu: f64,
    lengthscale: f64,
    /// sqrt(2 nu) / ell
    distance_scale: f64,
    /// 2^(1-nu) / Γ(nu)
    normalizer: f64,
    /// `Some(p)` when nu = p + 1/2.
    half_integer: Option<u32>,
}

impl MaternParams {
    fn new(nu: f64, lengthscale: f64) -> Result<Self, KernelError> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "nu",
                value: nu,
                reason: "smoothness must be finite and positive",
            });
        }
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "lengthscale",
                value: lengthscale,
                reason: "length-scale must be finite and positive",
            });
        }
        let gamma_nu = specfun::gamma(nu).map_err(|_| KernelError::InvalidParameter {
            name: "nu",
            value: nu,
            reason: "Gamma(nu) not representable",
        })?;
        let normalizer = (1.0 - nu).exp2() / gamma_nu;
        if !(normalizer.is_finite() && normalizer > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "nu",
                value: nu,
                reason: "Matérn normalizer not representable",
            });
        }
        let p = (nu - 0.5).round();
        let half_integer =
            (p >= 0.0 && (nu - (p + 0.5)).abs() < HALF_INTEGER_TOL).then_some(p as u32);
        Ok(Self {
            nu,
            lengthscale,
            distance_scale: (2.0 * nu).sqrt() / lengthscale,
            normalizer,
            half_integer,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Unit-scale Matérn correlation at Euclidean distance `r >= 0`.
    pub fn correlation(&self, r: f64) -> f64 {
        let s = self.distance_scale * r;
        if s < MATERN_ZERO_DISTANCE {
            return 1.0;
        }
        match self.half_integer {
            Some(p) => matern_half_integer(p, s),
            None => self.bessel_form(s),
        }
    }

    /// General-order evaluation through `K_nu`, bypassing the half-integer path.
    pub fn bessel_form(&self, s: f64) -> f64 {
        if s < MATERN_ZERO_DISTANCE {
            return 1.0;
        }
        let k = bessel_k_order_nonneg(self.nu, s);
        if k == 0.0 || !k.is_finite() {
            return if k == 0.0 { 0.0 } else { 1.0 };
        }
        self.normalizer * s.powf(self.nu) * k
    }
}

/// Matérn correlation for `nu = p + 1/2` at scaled distance `s`:
/// `e^{-s} p!/(2p)! Σ_i (p+i)!/(i!(p-i)!) (2s)^{p-i}`.
fn matern_half_integer(p: u32, s: f64) -> f64 {
    let p = p as usize;
    let fact = |n: usize| (1..=n).fold(1.0f64, |acc, k| acc * k as f64);
    let lead = fact(p) / fact(2 * p);
    let two_s = 2.0 * s;
    // Horner in (2s), highest power first: i = 0 carries (2s)^p.
    let mut acc = 0.0;
    for i in 0..=p {
        let c = fact(p + i) / (fact(i) * fact(p - i));
        acc = acc * two_s + c;
    }
    (-s).exp() * lead * acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Matern(MaternParams),
    BrownianMotion,
    ReleasedIbm,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Matern(_) => "matern",
            KernelFamily::BrownianMotion => "brownian_motion",
            KernelFamily::ReleasedIbm => "released_ibm",
        }
    }
}

/// A scaled positive-definite kernel `sigma² K` on [0,1]^dim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    sigma: f64,
}

impl KernelSpec {
    pub fn matern(nu: f64, lengthscale: f64, dim: usize) -> Result<Self, KernelError> {
        if dim == 0 {
            return Err(KernelError::InvalidParameter {
                name: "dim",
                value: 0.0,
                reason: "dimension must be at least 1",
            });
        }
        Ok(Self {
            family: KernelFamily::Matern(MaternParams::new(nu, lengthscale)?),
            dim,
            sigma: 1.0,
        })
    }

    pub fn brownian_motion() -> Self {
        Self {
            family: KernelFamily::BrownianMotion,
            dim: 1,
            sigma: 1.0,
        }
    }

    pub fn released_ibm() -> Self {
        Self {
            family: KernelFamily::ReleasedIbm,
            dim: 1,
            sigma: 1.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self, KernelError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "scale must be finite and positive",
            });
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// The same kernel with `sigma = 1`.
    pub fn unit(&self) -> Self {
        Self {
            sigma: 1.0,
            ..*self
        }
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Order α of the Sobolev space the RKHS is norm-equivalent to.
    pub fn sobolev_order(&self) -> f64 {
        match self.family {
            KernelFamily::Matern(m) => m.nu + self.dim as f64 / 2.0,
            KernelFamily::BrownianMotion => 1.0,
            KernelFamily::ReleasedIbm => 2.0,
        }
    }

    /// `sigma² K(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.sigma * self.sigma * self.eval_unit_unchecked(x, y))
    }

    /// Verifies that `x` has the right dimension and lies where the kernel is defined.
    pub fn check_point(&self, x: &[f64]) -> Result<(), KernelError> {
        if x.len() != self.dim {
            return Err(KernelError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let needs_unit_domain = !matches!(self.family, KernelFamily::Matern(_));
        let inside = x.iter().all(|c| (0.0..=1.0).contains(c));
        if needs_unit_domain && !inside || x.iter().any(|c| !c.is_finite()) {
            return Err(KernelError::OutsideDomain {
                point: x.to_vec(),
                dim: self.dim,
            });
        }
        Ok(())
    }

    /// Unit-scale `K(x, y)` without argument checks.
    #[inline]
    pub(crate) fn eval_unit_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Matern(m) => m.correlation(euclidean(x, y)),
            KernelFamily::BrownianMotion => x[0].min(y[0]),
            KernelFamily::ReleasedIbm => {
                let (x, y) = (x[0], y[0]);
                let m = x.min(y);
                1.0 + x * y + m * m * m / 3.0 + 0.5 * (x - y).abs() * m * m
            }
        }
    }
}

/// `sigma² K(x, y)` for the given kernel.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    spec.eval(x, y)
}

#[inline]
pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `f(x) = Σ a_i K_{eta,ell}(x, z_i)` with a unit-scale Matérn kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionExpansion {
    kernel: KernelSpec,
    coefficients: Vec<f64>,
    /// Row-major `m x dim`.
    centers: Vec<f64>,
}

impl FunctionExpansion {
    /// `centers` holds one point per coefficient, each of length `dim`.
    pub fn new(
        eta: f64,
        lengthscale: f64,
        coefficients: Vec<f64>,
        centers: &[Vec<f64>],
        dim: usize,
    ) -> Result<Self, KernelError> {
        let kernel = KernelSpec::matern(eta, lengthscale, dim)?;
        if coefficients.is_empty() {
            return Err(KernelError::InvalidExpansion(
                "at least one term is required".into(),
            ));
        }
        if coefficients.len() != centers.len() {
            return Err(KernelError::InvalidExpansion(format!(
                "{} coefficients but {} centers",
                coefficients.len(),
                centers.len()
            )));
        }
        if coefficients.iter().any(|a| !a.is_finite()) {
            return Err(KernelError::InvalidExpansion(
                "coefficients must be finite".into(),
            ));
        }
        for c in centers {
            if c.len() != dim {
                return Err(KernelError::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if !c.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(KernelError::OutsideDomain {
                    point: c.clone(),
                    dim,
                });
            }
        }
        for i in 0..centers.len() {
            for j in 0..i {
                if centers[i] == centers[j] {
                    return Err(KernelError::InvalidExpansion(format!(
                        "centers {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            kernel,
            coefficients,
            centers: centers.concat(),
        })
    }

    pub fn eta(&self) -> f64 {
        match self.kernel.family {
            KernelFamily::Matern(m) => m.nu,
            _ => unreachable!("expansion kernel is always Matérn"),
        }
    }

    pub fn lengthscale(&self) -> f64 {
        match self.kernel.family {
            KernelFamily::Matern(m) => m.lengthscale,
            _ => unreachable!("expansion kernel is always Matérn"),
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn center(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.centers[i * d..(i + 1) * d]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim())
    }

    /// The unit-scale Matérn kernel `K_{eta,ell}` the expansion is built from.
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Exact smoothness β = 2η + d/2 of the expansion.
    pub fn smoothness(&self) -> f64 {
        2.0 * self.eta() + self.dim() as f64 / 2.0
    }

    /// Same centers and kernel with every coefficient multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|a| lambda * a).collect(),
            ..self.clone()
        }
    }

    /// `f(x)`, summed in declaration order.
    pub fn eval(&self, x: &[f64]) -> Result<f64, KernelError> {
        self.kernel.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(self.centers())
            .map(|(a, z)| a * self.kernel.eval_unit_unchecked(x, z))
            .sum()
    }

    /// Errors unless `spec` is exactly the unit-scale kernel of this expansion.
    pub fn check_matches(&self, spec: &KernelSpec) -> Result<(), KernelError> {
        let KernelFamily::Matern(m) = spec.family else {
            return Err(KernelError::Mismatch(format!(
                "expansion is Matérn, kernel is {}",
                spec.family.name()
            )));
        };
        let close = |a: f64, b: f64| (a - b).abs() <= MATCH_TOL * a.abs().max(b.abs()).max(1.0);
        if !close(m.nu, self.eta()) {
            return Err(KernelError::Mismatch(format!(
                "kernel nu = {} but expansion eta = {}",
                m.nu,
                self.eta()
            )));
        }
        if !close(m.lengthscale, self.lengthscale()) {
            return Err(KernelError::Mismatch(format!(
                "kernel lengthscale = {} but expansion lengthscale = {}",
                m.lengthscale,
                self.lengthscale()
            )));
        }
        if spec.dim != self.dim() {
            return Err(KernelError::Mismatch(format!(
                "kernel dimension {} but expansion dimension {}",
                spec.dim,
                self.dim()
            )));
        }
        if spec.sigma != 1.0 {
            return Err(KernelError::Mismatch(format!(
                "RKHS norms use the unit-scale kernel, got sigma = {}",
                spec.sigma
            )));
        }
        Ok(())
    }

    /// `‖f‖_H = sqrt(aᵀ K_zz a)` in the RKHS of `spec`, which must equal the
    /// expansion's own kernel.
    pub fn rkhs_norm(&self, spec: &KernelSpec) -> Result<f64, KernelError> {
        self.check_matches(spec)?;
        Ok(self.rkhs_norm_squared().max(0.0).sqrt())
    }

    pub(crate) fn rkhs_norm_squared(&self) -> f64 {
        let a = &self.coefficients;
        let mut s = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                s += a[i]
                    * a[j]
                    * self
                        .kernel
                        .eval_unit_unchecked(self.center(i), self.center(j));
            }
        }
        s
    }
}

/// `f(x)` for a Matérn expansion.
pub fn eval_expansion(f: &FunctionExpansion, x: &[f64]) -> Result<f64, KernelError> {
    f.eval(x)
}

/// RKHS norm of a Matérn expansion under a matching kernel.
pub fn expansion_rkhs_norm(f: &FunctionExpansion, spec: &KernelSpec) -> Result<f64, KernelError> {
    f.rkhs_norm(spec)
}
