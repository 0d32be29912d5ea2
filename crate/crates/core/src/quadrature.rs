//! Adaptive composite Gauss–Legendre quadrature on bounded intervals.
//!
//! Each panel is integrated with a fixed-order Gauss–Legendre rule and then
//! again as two half panels; the difference of the two estimates is the error
//! indicator. Panels are bisected until the indicator drops below the panel's
//! share of the tolerance, which handles the algebraic endpoint singularities
//! of Matérn kernels at zero distance.

use std::f64::consts::PI;
use std::sync::OnceLock;

const PANEL_ORDER: usize = 20;
const MAX_DEPTH: u32 = 60;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule of order `n` (exact for polynomials of degree `2n - 1`).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        s * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Adaptive integral over `[breaks[0], breaks[last]]`, with panel boundaries
/// forced at every break point (kinks and singularities belong there).
pub fn integrate_with_breaks(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    assert!(breaks.len() >= 2, "need at least two break points");
    let total = breaks[breaks.len() - 1] - breaks[0];
    if total == 0.0 {
        return 0.0;
    }
    let rule = panel_rule();
    let density = tol / total.abs();
    let mut sum = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let whole = rule.integrate(&f, a, b);
        sum += refine(&f, rule, a, b, whole, density, 0);
    }
    sum
}

fn refine(
    f: &impl Fn(f64) -> f64,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    density: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let halves = left + right;
    let allowed = density * (b - a).abs();
    if (halves - whole).abs() <= allowed || depth >= MAX_DEPTH || mid == a || mid == b {
        return halves;
    }
    refine(f, rule, a, mid, left, density, depth + 1)
        + refine(f, rule, mid, b, right, density, depth + 1)
}

/// Iterated adaptive integral of `f(u, v)` over `[u0, u1] x [v0, v1]`.
///
/// `u_breaks` / `v_breaks` must include the interval ends.
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    u_breaks: &[f64],
    v_breaks: &[f64],
    tol: f64,
) -> f64 {
    let v_len = v_breaks[v_breaks.len() - 1] - v_breaks[0];
    let inner_tol = 0.1 * tol / v_len.abs().max(1.0);
    integrate_with_breaks(
        |u| integrate_with_breaks(|v| f(u, v), v_breaks, inner_tol),
        u_breaks,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_is_exact_on_polynomials() {
        for n in [1, 2, 5, 10, 20] {
            let rule = GaussLegendre::new(n);
            assert_eq!(rule.order(), n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                let got = rule.integrate(&|x: f64| x.powi(deg as i32), -1.0, 1.0);
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let rule = GaussLegendre::new(PANEL_ORDER);
        let s: f64 = rule.weights.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let got = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-13);
        assert_relative_eq!(got, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn breaks_resolve_kinks() {
        let got = integrate_with_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], 1e-14);
        assert_relative_eq!(got, 0.5 * (0.09 + 0.49), epsilon = 1e-14);
    }

    #[test]
    fn smooth_oscillatory() {
        let got = integrate(|x: f64| (10.0 * x).cos(), 0.0, 1.0, 1e-13);
        assert_relative_eq!(got, (10.0f64).sin() / 10.0, epsilon = 1e-13);
    }

    #[test]
    fn two_dimensional_product() {
        let got = integrate_2d(|u, v| u * v * v, &[0.0, 1.0], &[0.0, 2.0], 1e-12);
        assert_relative_eq!(got, 0.5 * 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn two_dimensional_corner_singularity() {
        // ∫∫_[0,1]² (u²+v²)^(1/4): compare against polar-free iterated reference
        // computed at a much tighter tolerance.
        let f = |u: f64, v: f64| (u * u + v * v).powf(0.25);
        let coarse = integrate_2d(f, &[0.0, 1.0], &[0.0, 1.0], 1e-9);
        let fine = integrate_2d(f, &[0.0, 1.0], &[0.0, 1.0], 1e-13);
        assert!((coarse - fine).abs() < 1e-8);
    }
}
