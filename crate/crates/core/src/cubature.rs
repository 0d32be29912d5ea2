//! Bayesian cubature on [0,1]^d with the unit weight.
//!
//! With kernel mean `z(x) = ∫ K(x, y) dy` and initial energy `E = ∫∫ K`, the
//! posterior over `I(f) = ∫ f` has mean `Q = z_Xᵀ K_X⁻¹ f_X` and unit-scale
//! variance `V = E - z_Xᵀ K_X⁻¹ z_X`.
//!
//! The Brownian motion kernels have polynomial embeddings. Matérn embeddings
//! use stationarity: in one dimension `z(x) = G(x) + G(1 - x)` with
//! `G(t) = ∫₀ᵗ Φ(r) dr`, and in two dimensions `z` splits into four
//! quadrant integrals of `Φ(sqrt(u² + v²))`.

use rayon::prelude::*;
use thiserror::Error;

use crate::gp::{clamp_variance, standard_score, GpError, GpFit};
use crate::kernels::{FunctionExpansion, KernelError, KernelFamily, KernelSpec};
use crate::quadrature::{integrate, integrate_2d, integrate_with_breaks};

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CubatureError {
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("numeric kernel embeddings support dimensions 1 and 2, got {0}")]
    UnsupportedDimension(usize),
    #[error("quadrature tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),
    #[error("embedding was built for a different kernel than the fit")]
    KernelMismatch,
    #[error("diagnostic lattice resolution {0} is below the minimum of 64")]
    ResolutionTooSmall(usize),
    #[error("trapezoid rule needs at least one panel")]
    NoPanels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMethod {
    ClosedForm,
    NumericQuadrature,
}

/// Kernel mean and initial energy of a unit-scale kernel under the Lebesgue measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    kernel: KernelSpec,
    method: EmbeddingMethod,
    tol: f64,
    initial_energy: f64,
}

impl Embedding {
    /// Closed form for the Brownian motion kernels, quadrature for Matérn.
    pub fn new(spec: &KernelSpec, tol: f64) -> Result<Self, CubatureError> {
        let method = match spec.family() {
            KernelFamily::Matern(_) => EmbeddingMethod::NumericQuadrature,
            _ => EmbeddingMethod::ClosedForm,
        };
        Self::with_method(spec, tol, method)
    }

    /// Forces quadrature even where a closed form exists.
    pub fn numeric(spec: &KernelSpec, tol: f64) -> Result<Self, CubatureError> {
        Self::with_method(spec, tol, EmbeddingMethod::NumericQuadrature)
    }

    fn with_method(
        spec: &KernelSpec,
        tol: f64,
        method: EmbeddingMethod,
    ) -> Result<Self, CubatureError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CubatureError::InvalidTolerance(tol));
        }
        if spec.dim() > 2 {
            return Err(CubatureError::UnsupportedDimension(spec.dim()));
        }
        let mut emb = Self {
            kernel: spec.unit(),
            method,
            tol,
            initial_energy: 0.0,
        };
        emb.initial_energy = emb.compute_initial_energy();
        Ok(emb)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn method(&self) -> EmbeddingMethod {
        self.method
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `∫∫ K(x, y) dx dy`.
    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    /// `∫ K(x, y) dy`.
    pub fn kernel_mean(&self, x: &[f64]) -> Result<f64, CubatureError> {
        self.kernel.check_point(x)?;
        Ok(self.kernel_mean_unchecked(x))
    }

    fn kernel_mean_unchecked(&self, x: &[f64]) -> f64 {
        let tol = self.tol;
        match (self.method, self.kernel.family()) {
            (EmbeddingMethod::ClosedForm, KernelFamily::BrownianMotion) => {
                let x = x[0];
                x - 0.5 * x * x
            }
            (EmbeddingMethod::ClosedForm, KernelFamily::ReleasedIbm) => {
                let x = x[0];
                1.0 + x * (0.5 + x * (0.25 + x * (-1.0 / 6.0 + x / 24.0)))
            }
            (_, KernelFamily::Matern(m)) if self.kernel.dim() == 1 => {
                let g = |t: f64| integrate(|r| m.correlation(r), 0.0, t, 0.5 * tol);
                g(x[0]) + g(1.0 - x[0])
            }
            (_, KernelFamily::Matern(m)) => {
                let mut s = 0.0;
                for a in [x[0], 1.0 - x[0]] {
                    for b in [x[1], 1.0 - x[1]] {
                        s += integrate_2d(
                            |u, v| m.correlation(u.hypot(v)),
                            &[0.0, a],
                            &[0.0, b],
                            0.25 * tol,
                        );
                    }
                }
                s
            }
            _ => {
                let k = &self.kernel;
                integrate_with_breaks(|y| k.eval_unit_unchecked(x, &[y]), &[0.0, x[0], 1.0], tol)
            }
        }
    }

    fn compute_initial_energy(&self) -> f64 {
        let tol = self.tol;
        match (self.method, self.kernel.family()) {
            (EmbeddingMethod::ClosedForm, KernelFamily::BrownianMotion) => 1.0 / 3.0,
            (EmbeddingMethod::ClosedForm, KernelFamily::ReleasedIbm) => 156.0 / 120.0,
            (_, KernelFamily::Matern(m)) if self.kernel.dim() == 1 => {
                2.0 * integrate(|r| (1.0 - r) * m.correlation(r), 0.0, 1.0, 0.5 * tol)
            }
            (_, KernelFamily::Matern(m)) => {
                4.0 * integrate_2d(
                    |u, v| (1.0 - u) * (1.0 - v) * m.correlation(u.hypot(v)),
                    &[0.0, 1.0],
                    &[0.0, 1.0],
                    0.25 * tol,
                )
            }
            _ => integrate(|x| self.kernel_mean_unchecked(&[x]), 0.0, 1.0, tol),
        }
    }
}

/// Builds the embedding of `spec` (closed form where available).
pub fn make_embedding(spec: &KernelSpec, tol: f64) -> Result<Embedding, CubatureError> {
    Embedding::new(spec, tol)
}

/// `∫_{[0,1]^d} f` for a Matérn expansion, via the kernel mean of its own kernel.
pub fn expansion_integral(f: &FunctionExpansion, tol: f64) -> Result<f64, CubatureError> {
    let scale: f64 = f.coefficients().iter().map(|a| a.abs()).sum();
    let emb = Embedding::new(f.kernel(), tol / scale.max(1.0))?;
    Ok(f.coefficients()
        .iter()
        .zip(f.centers())
        .map(|(a, z)| a * emb.kernel_mean_unchecked(z))
        .sum())
}

/// Posterior summary of `∫ f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureResult {
    /// Posterior mean `Q_X(f)`.
    pub mean: f64,
    /// Unit-scale posterior variance `V_X`.
    pub variance: f64,
    /// Unscaled credible width `R_BC = σ_ML sqrt(V_X)`.
    pub width: f64,
    /// `|I(f) - Q| / R_BC` when the true integral is supplied.
    pub score: Option<f64>,
    /// The same score with the kernel's own fixed scale in place of `σ_ML`.
    pub fixed_sigma_score: Option<f64>,
}

/// Bayesian cubature for a conditioned process.
pub fn cubature(
    fit: &GpFit,
    emb: &Embedding,
    true_integral: Option<f64>,
) -> Result<CubatureResult, CubatureError> {
    if *emb.kernel() != fit.spec().unit() {
        return Err(CubatureError::KernelMismatch);
    }
    let z: Vec<f64> = fit
        .points()
        .iter()
        .map(|p| emb.kernel_mean_unchecked(p))
        .collect();
    let mean: f64 = z.iter().zip(fit.weights()).map(|(a, b)| a * b).sum();
    let variance = clamp_variance(emb.initial_energy() - fit.inverse_quad_form(&z))?;
    let root_v = variance.sqrt();
    let width = fit.sigma_ml() * root_v;
    let (score, fixed_sigma_score) = match true_integral {
        Some(truth) => (
            Some(standard_score(truth - mean, width)?),
            Some(standard_score(truth - mean, fit.spec().sigma() * root_v)?),
        ),
        None => (None, None),
    };
    Ok(CubatureResult {
        mean,
        variance,
        width,
        score,
        fixed_sigma_score,
    })
}

/// Composite trapezoid rule on `n` equal panels of [0,1].
pub fn trapezoid_reference(f: impl Fn(f64) -> f64, n: usize) -> Result<f64, CubatureError> {
    if n == 0 {
        return Err(CubatureError::NoPanels);
    }
    let h = 1.0 / n as f64;
    let values: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
    Ok(values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum())
}

/// `sqrt(N) · ‖var₁^{1/2}‖_{L²}` by the midpoint rule on a `resolution^d` lattice.
pub fn underconfidence_diagnostic(fit: &GpFit, resolution: usize) -> Result<f64, CubatureError> {
    if resolution < 64 {
        return Err(CubatureError::ResolutionTooSmall(resolution));
    }
    let dim = fit.spec().dim();
    if dim > 2 {
        return Err(CubatureError::UnsupportedDimension(dim));
    }
    let step = 1.0 / resolution as f64;
    let cells = resolution.pow(dim as u32);
    // Collect before summing so the result does not depend on the thread count.
    let vars = (0..cells)
        .into_par_iter()
        .map(|c| {
            let x: Vec<f64> = if dim == 1 {
                vec![(c as f64 + 0.5) * step]
            } else {
                vec![
                    ((c / resolution) as f64 + 0.5) * step,
                    ((c % resolution) as f64 + 0.5) * step,
                ]
            };
            fit.unit_var(&x)
        })
        .collect::<Result<Vec<f64>, GpError>>()?;
    let integral = vars.iter().sum::<f64>() / cells as f64;
    Ok((fit.len() as f64).sqrt() * integral.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointsets::{uniform_grid, PointSet};
    use approx::assert_relative_eq;

    #[test]
    fn brownian_motion_closed_form() {
        let e = make_embedding(&KernelSpec::brownian_motion(), 1e-12).unwrap();
        assert_eq!(e.method(), EmbeddingMethod::ClosedForm);
        assert_eq!(e.kernel_mean(&[0.0]).unwrap(), 0.0);
        assert_eq!(e.kernel_mean(&[1.0]).unwrap(), 0.5);
        assert_eq!(e.initial_energy(), 1.0 / 3.0);
        assert!(e.kernel_mean(&[1.5]).is_err());
    }

    #[test]
    fn released_ibm_closed_form() {
        let e = make_embedding(&KernelSpec::released_ibm(), 1e-12).unwrap();
        assert_eq!(e.kernel_mean(&[0.0]).unwrap(), 1.0);
        // 1 + 1/2 + 1/4 - 1/6 + 1/24
        assert_relative_eq!(
            e.kernel_mean(&[1.0]).unwrap(),
            39.0 / 24.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(e.initial_energy(), 1.3, max_relative = 1e-15);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for spec in [KernelSpec::brownian_motion(), KernelSpec::released_ibm()] {
            let closed = Embedding::new(&spec, 1e-13).unwrap();
            let numeric = Embedding::numeric(&spec, 1e-13).unwrap();
            assert_eq!(numeric.method(), EmbeddingMethod::NumericQuadrature);
            for i in 0..=20 {
                let x = [i as f64 / 20.0];
                assert_relative_eq!(
                    closed.kernel_mean(&x).unwrap(),
                    numeric.kernel_mean(&x).unwrap(),
                    epsilon = 1e-12
                );
            }
            assert_relative_eq!(
                closed.initial_energy(),
                numeric.initial_energy(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn exponential_kernel_embedding() {
        // ν = 1/2: Φ(r) = exp(-r/ℓ), so G(t) = ℓ(1 - exp(-t/ℓ)).
        let ell = 0.3;
        let e = make_embedding(&KernelSpec::matern(0.5, ell, 1).unwrap(), 1e-13).unwrap();
        let g = |t: f64| ell * (1.0 - (-t / ell).exp());
        for x in [0.0, 0.2, 0.5, 0.9] {
            assert_relative_eq!(
                e.kernel_mean(&[x]).unwrap(),
                g(x) + g(1.0 - x),
                epsilon = 1e-13
            );
        }
        let energy = 2.0 * (ell - ell * ell * (1.0 - (-1.0 / ell).exp()));
        assert_relative_eq!(e.initial_energy(), energy, epsilon = 1e-13);
    }

    #[test]
    fn two_dimensional_embedding_is_symmetric() {
        let spec = KernelSpec::matern(1.5, 0.4, 2).unwrap();
        let e = make_embedding(&spec, 1e-10).unwrap();
        let a = e.kernel_mean(&[0.2, 0.7]).unwrap();
        let b = e.kernel_mean(&[0.8, 0.3]).unwrap();
        let c = e.kernel_mean(&[0.7, 0.2]).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-10);
        assert_relative_eq!(a, c, epsilon = 1e-10);
        // The energy is the mean of the kernel mean.
        let n = 24;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let u = (i as f64 + 0.5) / n as f64;
                let v = (j as f64 + 0.5) / n as f64;
                s += e.kernel_mean(&[u, v]).unwrap();
            }
        }
        assert_relative_eq!(s / (n * n) as f64, e.initial_energy(), max_relative = 1e-3);
    }

    #[test]
    fn trapezoid_examples() {
        assert_relative_eq!(
            trapezoid_reference(|_| 3.0, 7).unwrap(),
            3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            trapezoid_reference(|x| x, 5).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            trapezoid_reference(|x| x * x, 2).unwrap(),
            0.375,
            max_relative = 1e-15
        );
        assert!(trapezoid_reference(|x| x, 0).is_err());
    }

    fn bm_grid(n: usize) -> PointSet {
        let pts: Vec<Vec<f64>> = (1..=n).map(|i| vec![i as f64 / n as f64]).collect();
        PointSet::explicit(&pts, 1).unwrap()
    }

    #[test]
    fn brownian_motion_is_trapezoidal() {
        let spec = KernelSpec::brownian_motion();
        let emb = make_embedding(&spec, 1e-12).unwrap();
        let f = |x: f64| x * x + (3.0 * x).sin();
        for n in [1, 2, 5, 17, 64] {
            let x = bm_grid(n);
            let fx: Vec<f64> = x.iter().map(|p| f(p[0])).collect();
            let fit = GpFit::fit(spec, &x, &fx).unwrap();
            let r = cubature(&fit, &emb, None).unwrap();
            assert_relative_eq!(r.mean, trapezoid_reference(f, n).unwrap(), epsilon = 1e-10);
            let v = 1.0 / (12.0 * (n * n) as f64);
            assert_relative_eq!(r.variance, v, max_relative = 1e-9);
            assert!(r.score.is_none());
        }
    }

    #[test]
    fn zero_data_score_convention() {
        let spec = KernelSpec::matern(1.5, 0.3, 1).unwrap();
        let emb = make_embedding(&spec, 1e-12).unwrap();
        let x = uniform_grid(6).unwrap();
        let fit = GpFit::fit(spec, &x, &[0.0; 6]).unwrap();
        let r = cubature(&fit, &emb, Some(0.0)).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.score, Some(1.0));
    }

    #[test]
    fn mismatched_embedding() {
        let spec = KernelSpec::matern(1.5, 0.3, 1).unwrap();
        let emb = make_embedding(&KernelSpec::matern(2.5, 0.3, 1).unwrap(), 1e-10).unwrap();
        let x = uniform_grid(3).unwrap();
        let fit = GpFit::fit(spec, &x, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            cubature(&fit, &emb, None),
            Err(CubatureError::KernelMismatch)
        );
        // Scale does not matter: embeddings are unit-scale.
        let scaled = spec.with_sigma(2.0).unwrap();
        let fit = GpFit::fit(scaled, &x, &[1.0, 2.0, 3.0]).unwrap();
        let emb = make_embedding(&scaled, 1e-10).unwrap();
        assert!(cubature(&fit, &emb, None).is_ok());
    }

    #[test]
    fn expansion_integral_of_exponential_terms() {
        let ell = 0.2;
        let f =
            FunctionExpansion::new(0.5, ell, vec![2.0, -1.0], &[vec![0.1], vec![0.6]], 1).unwrap();
        let g = |t: f64| ell * (1.0 - (-t / ell).exp());
        let exact = 2.0 * (g(0.1) + g(0.9)) - (g(0.6) + g(0.4));
        assert_relative_eq!(
            expansion_integral(&f, 1e-12).unwrap(),
            exact,
            epsilon = 1e-12
        );
    }

    #[test]
    fn diagnostic_single_point() {
        let fit = GpFit::fit(KernelSpec::brownian_motion(), &bm_grid(1), &[1.0]).unwrap();
        let d = underconfidence_diagnostic(&fit, 512).unwrap();
        // Midpoint rule error for x - x² is h²/12.
        let exact = (1.0f64 / 6.0).sqrt();
        assert_relative_eq!(d, exact, max_relative = 1e-5);
        assert!(underconfidence_diagnostic(&fit, 32).is_err());
    }
}
