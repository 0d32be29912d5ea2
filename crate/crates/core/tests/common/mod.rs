//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's own quadrature or special functions.

#![allow(dead_code, clippy::excessive_precision)]

use gpmle::kernels::{FunctionExpansion, KernelSpec};
use gpmle::pointsets::PointSet;
use rand::Rng;

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Gauss–Kronrod 7/15 estimate and error indicator on `[a, b]`.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G7_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod with a relative tolerance on the total.
pub fn gauss_kronrod(f: &dyn Fn(f64) -> f64, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut panels: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    for _ in 0..2_000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() {
            break;
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.partial_cmp(&b.1 .3).unwrap())
            .unwrap();
        let (a, b, _, _) = panels.swap_remove(k);
        let m = 0.5 * (a + b);
        for (lo, hi) in [(a, m), (m, b)] {
            let (v, e) = gk15(f, lo, hi);
            panels.push((lo, hi, v, e));
        }
    }
    // Sum small panels first.
    let mut vals: Vec<f64> = panels.iter().map(|p| p.2).collect();
    vals.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    vals.iter().sum()
}

/// `K_ν(x) = ∫₀^∞ exp(-x cosh t) cosh(ν t) dt`.
pub fn bessel_k_oracle(nu: f64, x: f64) -> f64 {
    let exponent = |t: f64| nu * t - x * t.cosh();
    let peak_t = (nu / x).asinh();
    let peak = exponent(peak_t);
    let mut upper = peak_t + 1.0;
    while exponent(upper) > peak - 80.0 {
        upper = peak_t + 2.0 * (upper - peak_t);
    }
    let f = |t: f64| 0.5 * ((nu * t - x * t.cosh()).exp() + (-nu * t - x * t.cosh()).exp());
    let mut breaks = vec![0.0];
    if peak_t > 0.0 {
        breaks.push(peak_t);
    }
    breaks.push(upper);
    gauss_kronrod(&f, &breaks, 1e-15)
}

/// `Γ(x)` from `∫₀¹ t^(x-1) e^(-t) dt` (termwise series) plus `∫₁^∞` by quadrature.
pub fn gamma_oracle(x: f64) -> f64 {
    let mut head = 0.0;
    let mut fact = 1.0;
    for k in 0..60 {
        if k > 0 {
            fact *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        head += sign / (fact * (x + k as f64));
    }
    let f = |t: f64| ((x - 1.0) * t.ln() - t).exp();
    let peak = (x - 1.0).max(1.0);
    let upper = peak + 60.0 + 12.0 * peak.sqrt();
    let tail = gauss_kronrod(&f, &[1.0, peak, upper], 1e-15);
    head + tail
}

/// Random unit-scale Matérn expansion on [0,1]^dim with its own kernel.
pub fn random_expansion(
    rng: &mut impl Rng,
    dim: usize,
    smoothness: &[f64],
    lengthscale: (f64, f64),
) -> (FunctionExpansion, KernelSpec) {
    let eta = smoothness[rng.gen_range(0..smoothness.len())];
    let ell = rng.gen_range(lengthscale.0..lengthscale.1);
    let m = rng.gen_range(1..=5);
    let coefficients: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let centers: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let f = FunctionExpansion::new(eta, ell, coefficients, &centers, dim).unwrap();
    let k = KernelSpec::matern(eta, ell, dim).unwrap();
    (f, k)
}

/// Base-2 radical inverse, computed digit by digit.
pub fn radical_inverse(mut i: u64) -> f64 {
    let mut value = 0.0;
    let mut scale = 0.5;
    while i > 0 {
        if i & 1 == 1 {
            value += scale;
        }
        i >>= 1;
        scale *= 0.5;
    }
    value
}

/// First `n` points of the van der Corput sequence rotated by `shift` (mod 1).
pub fn shifted_vdc(n: usize, shift: f64) -> PointSet {
    let pts: Vec<Vec<f64>> = (0..n as u64)
        .map(|i| {
            let v = radical_inverse(i) + shift;
            vec![if v >= 1.0 { v - 1.0 } else { v }]
        })
        .collect();
    PointSet::explicit(&pts, 1).unwrap()
}

/// Random well-separated design in [0,1]²: a shifted van der Corput sequence
/// in the first coordinate and a shifted uniform grid in the second.
pub fn random_points_2d(rng: &mut impl Rng, n: usize) -> PointSet {
    let sx = rng.gen_range(0.0..1.0);
    let sy = rng.gen_range(0.0..1.0);
    let wrap = |v: f64| if v >= 1.0 { v - 1.0 } else { v };
    let pts: Vec<Vec<f64>> = (0..n as u64)
        .map(|i| {
            vec![
                wrap(radical_inverse(i) + sx),
                wrap((i as f64 + 0.5) / n as f64 + sy),
            ]
        })
        .collect();
    PointSet::explicit(&pts, 2).unwrap()
}
