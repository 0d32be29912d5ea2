//! Noiseless Gaussian process conditioning with a closed-form scale estimate.
//!
//! For observations `f_X` at `X`, the conditional mean and unit-scale variance are
//!
//! ```text
//! s(x)      = k_X(x)ᵀ K_X⁻¹ f_X
//! var₁(x)   = K(x, x) - k_X(x)ᵀ K_X⁻¹ k_X(x)
//! ```
//!
//! and the maximum likelihood scale is `σ_ML = sqrt(f_Xᵀ K_X⁻¹ f_X / N)`.
//! All matrices are built from the unit-scale kernel; the scale only enters
//! through explicit `sigma` factors.

use std::f64::consts::PI;

use thiserror::Error;

use crate::kernels::{FunctionExpansion, KernelError, KernelSpec};
use crate::linalg::{Cholesky, FactorizationError, SquareMatrix};
use crate::pointsets::PointSet;
use crate::specfun::{inv_norm_cdf, DomainError};

/// Widths and errors below this are treated as exactly zero when scoring.
pub const ZERO_SCORE_TOL: f64 = 1e-14;
/// Negative variances down to this value are round-off and clamp to zero.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error(transparent)]
    Factorization(#[from] FactorizationError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("expected {expected} observations, got {got}")]
    ObservationCount { expected: usize, got: usize },
    #[error("observation {index} is not finite ({value})")]
    NonFiniteObservation { index: usize, value: f64 },
    #[error("point set has dimension {points} but kernel has dimension {kernel}")]
    DimensionMismatch { points: usize, kernel: usize },
    #[error(
        "conditional variance {value:e} is negative beyond round-off; factorization is unreliable"
    )]
    NegativeVariance { value: f64 },
    #[error("credible width {width:e} is zero but the error {error:e} is not; score is undefined")]
    DegenerateScore { error: f64, width: f64 },
    #[error("scale must be finite and positive, got {0}")]
    InvalidSigma(f64),
    #[error("credible level parameter a must lie in (0,1), got {0}")]
    InvalidLevel(f64),
}

/// `center ± half_width` with `half_width = psi · R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleInterval {
    pub center: f64,
    pub half_width: f64,
    /// Nominal coverage `1 - a`.
    pub level: f64,
    pub psi: f64,
}

/// `ψ_a = Φ⁻¹(1 - a/2)`.
pub fn credible_multiplier(a: f64) -> Result<f64, GpError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(GpError::InvalidLevel(a));
    }
    Ok(inv_norm_cdf(1.0 - a / 2.0)?)
}

/// `|error| / width` with the convention `0/0 = 1`.
pub fn standard_score(error: f64, width: f64) -> Result<f64, GpError> {
    let error = error.abs();
    if width < ZERO_SCORE_TOL {
        if error < ZERO_SCORE_TOL {
            return Ok(1.0);
        }
        return Err(GpError::DegenerateScore { error, width });
    }
    Ok(error / width)
}

/// Clamps round-off negatives of a variance-like quantity.
pub(crate) fn clamp_variance(value: f64) -> Result<f64, GpError> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NEGATIVE_VARIANCE_TOL {
        Ok(0.0)
    } else {
        Err(GpError::NegativeVariance { value })
    }
}

/// A conditioned Gaussian process. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpFit {
    spec: KernelSpec,
    points: PointSet,
    values: Vec<f64>,
    chol: Cholesky,
    weights: Vec<f64>,
    quad_form: f64,
    sigma_ml: f64,
}

impl GpFit {
    /// Conditions the process on `values[i] = f(points[i])`.
    pub fn fit(spec: KernelSpec, points: &PointSet, values: &[f64]) -> Result<Self, GpError> {
        if points.dim() != spec.dim() {
            return Err(GpError::DimensionMismatch {
                points: points.dim(),
                kernel: spec.dim(),
            });
        }
        let n = points.len();
        if values.len() != n || n == 0 {
            return Err(GpError::ObservationCount {
                expected: n.max(1),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GpError::NonFiniteObservation { index, value });
        }
        for p in points.iter() {
            spec.check_point(p)?;
        }
        let k = SquareMatrix::symmetric_from_fn(n, |i, j| {
            spec.eval_unit_unchecked(points.point(i), points.point(j))
        });
        let chol = Cholesky::factor(&k)?;
        let alpha = chol.forward_solve(values);
        let quad_form: f64 = alpha.iter().map(|a| a * a).sum();
        let weights = chol.backward_solve(&alpha);
        Ok(Self {
            spec,
            points: points.clone(),
            values: values.to_vec(),
            chol,
            weights,
            quad_form,
            sigma_ml: (quad_form / n as f64).sqrt(),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `K_X⁻¹ f_X`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `f_Xᵀ K_X⁻¹ f_X`.
    pub fn quad_form(&self) -> f64 {
        self.quad_form
    }

    pub fn sigma_ml(&self) -> f64 {
        self.sigma_ml
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    /// `(k_X(x))_i = K(x, x_i)` at unit scale.
    fn cross_covariances(&self, x: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| self.spec.eval_unit_unchecked(x, p))
            .collect()
    }

    /// `bᵀ K_X⁻¹ b` for an arbitrary vector `b`.
    pub(crate) fn inverse_quad_form(&self, b: &[f64]) -> f64 {
        self.chol.forward_solve(b).iter().map(|v| v * v).sum()
    }

    /// Conditional mean `s(x)`; exact at data points.
    pub fn mean(&self, x: &[f64]) -> Result<f64, GpError> {
        self.spec.check_point(x)?;
        if let Some(i) = self.points.position(x) {
            return Ok(self.values[i]);
        }
        Ok(self.mean_unsnapped(x))
    }

    fn mean_unsnapped(&self, x: &[f64]) -> f64 {
        self.cross_covariances(x)
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| k * w)
            .sum()
    }

    /// Unit-scale conditional variance `var₁(x)`; exactly zero at data points.
    pub fn unit_var(&self, x: &[f64]) -> Result<f64, GpError> {
        self.spec.check_point(x)?;
        if self.points.position(x).is_some() {
            return Ok(0.0);
        }
        clamp_variance(self.unit_var_unsnapped(x))
    }

    fn unit_var_unsnapped(&self, x: &[f64]) -> f64 {
        let kxx = self.spec.eval_unit_unchecked(x, x);
        kxx - self.inverse_quad_form(&self.cross_covariances(x))
    }

    /// Conditional variance at the kernel's own scale, `sigma² var₁(x)`.
    pub fn var(&self, x: &[f64]) -> Result<f64, GpError> {
        let s = self.spec.sigma();
        Ok(s * s * self.unit_var(x)?)
    }

    pub fn log_marginal_likelihood(&self, sigma: f64) -> Result<f64, GpError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(GpError::InvalidSigma(sigma));
        }
        let n = self.len() as f64;
        let s2 = sigma * sigma;
        Ok(-0.5 * (self.quad_form / s2 + n * s2.ln() + self.log_det() + n * (2.0 * PI).ln()))
    }

    /// Unscaled credible width `R_GP(x) = σ_ML sqrt(var₁(x))`.
    pub fn credible_width(&self, x: &[f64]) -> Result<f64, GpError> {
        Ok(self.sigma_ml * self.unit_var(x)?.sqrt())
    }

    pub fn credible_interval_gp(&self, x: &[f64], a: f64) -> Result<CredibleInterval, GpError> {
        let psi = credible_multiplier(a)?;
        Ok(CredibleInterval {
            center: self.mean(x)?,
            half_width: psi * self.credible_width(x)?,
            level: 1.0 - a,
            psi,
        })
    }

    /// `|f_true - s(x)| / R_GP(x)`.
    pub fn standard_score_gp(&self, x: &[f64], f_true: f64) -> Result<f64, GpError> {
        standard_score(f_true - self.mean(x)?, self.credible_width(x)?)
    }

    /// Score with a fixed scale `sigma` in place of `σ_ML`.
    pub fn standard_score_with_sigma(
        &self,
        x: &[f64],
        f_true: f64,
        sigma: f64,
    ) -> Result<f64, GpError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(GpError::InvalidSigma(sigma));
        }
        standard_score(f_true - self.mean(x)?, sigma * self.unit_var(x)?.sqrt())
    }

    /// `‖s‖_H = sqrt(f_Xᵀ K_X⁻¹ f_X) = sqrt(N) σ_ML`.
    pub fn rkhs_norm_of_mean(&self) -> f64 {
        self.quad_form.sqrt()
    }

    /// `‖f - s‖_H` for a function in the span of the same kernel.
    pub fn rkhs_error(&self, f: &FunctionExpansion) -> Result<f64, GpError> {
        f.check_matches(&self.spec.unit())?;
        Ok((f.rkhs_norm_squared() - self.quad_form).max(0.0).sqrt())
    }
}
