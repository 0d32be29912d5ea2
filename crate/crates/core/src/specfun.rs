//! Special functions used by the kernel layer and by credible intervals.
//!
//! | Function | Method |
//! |----------|--------|
//! | [`gamma`] | Lanczos approximation (g = 671/128, 14 terms) |
//! | [`bessel_k`] | Temme series for `x < 2`, Steed's continued fraction otherwise, then forward recurrence in the order |
//! | [`norm_cdf`] | `erfc` |
//! | [`inv_norm_cdf`] | rational initial guess refined by one Halley step |
//!
//! All functions are pure and allocation free.

use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Argument outside the domain of a special function.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{function}: argument {value} outside domain ({expected})")]
pub struct DomainError {
    pub function: &'static str,
    pub value: f64,
    pub expected: &'static str,
}

/// How a special-function value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecFunFlag {
    Ok,
    /// The true value is below the smallest normal `f64`; `value` is zero.
    UnderflowToZero,
    /// The true value exceeds `f64::MAX`; `value` is `+inf`.
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFunResult {
    pub value: f64,
    pub flag: SpecFunFlag,
}

impl SpecFunResult {
    fn classify(value: f64) -> Self {
        if value.is_infinite() {
            Self {
                value: f64::INFINITY,
                flag: SpecFunFlag::Overflow,
            }
        } else if value < f64::MIN_POSITIVE {
            Self {
                value: 0.0,
                flag: SpecFunFlag::UnderflowToZero,
            }
        } else {
            Self {
                value,
                flag: SpecFunFlag::Ok,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Gamma
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_1;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

/// Exact factorials `(n-1)!` for `Γ(n)`, `n = 1..=23`.
const FACTORIALS: [f64; 23] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
    20922789888000.0,
    355687428096000.0,
    6402373705728000.0,
    121645100408832000.0,
    2432902008176640000.0,
    51090942171709440000.0,
    1124000727777607680000.0,
];

/// Γ(x) for finite `x > 0`.
///
/// Returns `+inf` once the result exceeds the `f64` range (x > 171.6).
pub fn gamma(x: f64) -> Result<f64, DomainError> {
    if !(x.is_finite() && x > 0.0) {
        return Err(DomainError {
            function: "gamma",
            value: x,
            expected: "finite x > 0",
        });
    }
    if x.fract() == 0.0 && x <= FACTORIALS.len() as f64 {
        return Ok(FACTORIALS[x as usize - 1]);
    }
    if x < 1.0 {
        return Ok(lanczos_gamma(x + 1.0) / x);
    }
    Ok(lanczos_gamma(x))
}

fn lanczos_gamma(x: f64) -> f64 {
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS_COEFFS {
        y += 1.0;
        ser += c / y;
    }
    let t = x + LANCZOS_G;
    // t^(x+1/2) is split in two halves so that the power and the exponential
    // stay in range up to the point where Γ itself overflows.
    let half = t.powf(0.5 * (x + 0.5));
    SQRT_2PI * ser / x * (half * (-t).exp()) * half
}

// ---------------------------------------------------------------------------
// Modified Bessel function of the second kind
// ---------------------------------------------------------------------------

const BESSEL_EPS: f64 = 1e-16;
const BESSEL_MAXIT: usize = 10_000;

/// Taylor coefficients of 1/Γ(z) = Σ c_k z^k, k = 1..=26.
#[allow(clippy::excessive_precision)]
const RGAMMA_TAYLOR: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
];

/// Temme's auxiliary functions for |mu| <= 1/2:
/// (Γ1(mu), Γ2(mu), 1/Γ(1+mu), 1/Γ(1-mu)).
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut odd = 0.0; // Σ_{k odd} c_k mu^(k-1)  -> Γ2
    let mut even = 0.0; // Σ_{k even} c_k mu^(k-2) -> -Γ1
    let mu2 = mu * mu;
    // Horner in mu^2, highest order first.
    for k in (0..13).rev() {
        odd = odd * mu2 + RGAMMA_TAYLOR[2 * k];
        even = even * mu2 + RGAMMA_TAYLOR[2 * k + 1];
    }
    let gam1 = -even;
    let gam2 = odd;
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

/// `(K_mu(x), K_mu+1(x))` for |mu| <= 1/2 and `0 < x < 2`.
fn bessel_k_temme(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < BESSEL_EPS {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < BESSEL_EPS {
        1.0
    } else {
        e.sinh() / e
    };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / gampl;
    let mut q = 0.5 / (e * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    for i in 1..BESSEL_MAXIT {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * BESSEL_EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// `(e^x K_mu(x), e^x K_mu+1(x))` for |mu| <= 1/2 and `x >= 2`
/// (Steed's algorithm for the second continued fraction).
fn bessel_k_steed_scaled(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..BESSEL_MAXIT {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < BESSEL_EPS {
            break;
        }
    }
    h *= a1;
    let kmu = (PI / (2.0 * x)).sqrt() / s;
    let kmu1 = kmu * (mu + x + 0.5 - h) / x;
    (kmu, kmu1)
}

/// Modified Bessel function of the second kind `K_nu(x)` for real `nu > 0`, `x > 0`.
///
/// Large arguments legitimately underflow; that case is reported through
/// [`SpecFunFlag::UnderflowToZero`] rather than as an error.
pub fn bessel_k(nu: f64, x: f64) -> Result<SpecFunResult, DomainError> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(DomainError {
            function: "bessel_k",
            value: nu,
            expected: "finite order nu > 0",
        });
    }
    if !(x > 0.0) || x.is_nan() {
        return Err(DomainError {
            function: "bessel_k",
            value: x,
            expected: "argument x > 0",
        });
    }
    if x == f64::INFINITY {
        return Ok(SpecFunResult {
            value: 0.0,
            flag: SpecFunFlag::UnderflowToZero,
        });
    }
    Ok(SpecFunResult::classify(bessel_k_order_nonneg(nu, x)))
}

/// `K_nu(x)` for `nu >= 0`, finite `x > 0`; no argument checks.
pub(crate) fn bessel_k_order_nonneg(nu: f64, x: f64) -> f64 {
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let scaled = x >= 2.0;
    let (mut kmu, mut k1) = if scaled {
        bessel_k_steed_scaled(mu, x)
    } else {
        bessel_k_temme(mu, x)
    };
    let two_over_x = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * two_over_x * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    if scaled && kmu.is_finite() {
        (kmu.ln() - x).exp()
    } else {
        kmu
    }
}

// ---------------------------------------------------------------------------
// Standard normal distribution
// ---------------------------------------------------------------------------

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam_guess(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    let tail = |q: f64| {
        let c = &ACKLAM_C;
        let d = &ACKLAM_D;
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let a = &ACKLAM_A;
        let b = &ACKLAM_B;
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Quantile function F⁻¹ of the standard normal distribution, `0 < p < 1`.
pub fn inv_norm_cdf(p: f64) -> Result<f64, DomainError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DomainError {
            function: "inv_norm_cdf",
            value: p,
            expected: "0 < p < 1",
        });
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail so the residual is computed without cancellation;
    // the upper tail follows from F⁻¹(p) = -F⁻¹(1-p).
    let (q, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let x = acklam_guess(q);
    let e = 0.5 * libm::erfc(-x / SQRT_2) - q;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    Ok(sign * (x - u / (1.0 + 0.5 * x * u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma(1.5).unwrap(), 0.5 * PI.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn gamma_rejects_non_positive() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert!(gamma(f64::NAN).is_err());
        assert!(gamma(f64::INFINITY).is_err());
    }

    #[test]
    fn gamma_recurrence() {
        let mut x = 0.013;
        while x <= 20.0 {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            x += 0.173;
        }
    }

    #[test]
    fn gamma_overflows_to_infinity() {
        assert!(gamma(180.0).unwrap().is_infinite());
    }

    #[test]
    fn bessel_half_integer_closed_forms() {
        let closed = |nu: f64, x: f64| -> f64 {
            let base = (PI / (2.0 * x)).sqrt() * (-x).exp();
            let y = 1.0 / x;
            match (2.0 * nu) as i32 {
                1 => base,
                3 => base * (1.0 + y),
                5 => base * (1.0 + 3.0 * y + 3.0 * y * y),
                7 => base * (1.0 + 6.0 * y + 15.0 * y * y + 15.0 * y * y * y),
                _ => unreachable!(),
            }
        };
        for nu in [0.5, 1.5, 2.5, 3.5] {
            for &x in &[1e-3, 0.01, 0.3, 1.0, 1.99, 2.0, 2.01, 5.0, 17.0, 60.0] {
                let k = bessel_k(nu, x).unwrap();
                assert_eq!(k.flag, SpecFunFlag::Ok);
                assert_relative_eq!(k.value, closed(nu, x), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn bessel_spec_examples() {
        let k = bessel_k(0.5, 1.0).unwrap().value;
        assert_relative_eq!(k, (PI / 2.0).sqrt() * (-1.0f64).exp(), max_relative = 1e-14);
        let k = bessel_k(1.5, 2.0).unwrap().value;
        let expected = (PI / 4.0).sqrt() * (-2.0f64).exp() * 1.5;
        assert_relative_eq!(k, expected, max_relative = 1e-13);
    }

    #[test]
    fn bessel_recurrence_consistency() {
        let mut nu = 1.0;
        while nu <= 6.0 {
            let mut x = 0.1;
            while x <= 20.0 {
                let km = bessel_k_order_nonneg(nu - 1.0, x);
                let k = bessel_k_order_nonneg(nu, x);
                let kp = bessel_k_order_nonneg(nu + 1.0, x);
                assert_relative_eq!(kp, km + 2.0 * nu / x * k, max_relative = 1e-9);
                x *= 1.37;
            }
            nu += 0.25;
        }
    }

    #[test]
    fn bessel_monotone_in_x() {
        for &nu in &[0.1, 0.5, 1.0, 2.25, 4.0, 7.9] {
            let mut prev = f64::INFINITY;
            let mut x = 1e-3;
            while x < 60.0 {
                let k = bessel_k(nu, x).unwrap().value;
                assert!(k < prev, "nu={nu} x={x}");
                prev = k;
                x *= 1.05;
            }
        }
    }

    #[test]
    fn bessel_continuous_across_branch_switch() {
        for &nu in &[0.2, 1.0, 2.7, 6.0] {
            let lo = bessel_k(nu, 2.0 - 1e-12).unwrap().value;
            let hi = bessel_k(nu, 2.0).unwrap().value;
            assert_relative_eq!(lo, hi, max_relative = 1e-11);
        }
    }

    #[test]
    fn bessel_near_integer_orders_are_continuous() {
        for &n in &[1.0, 2.0, 3.0] {
            for &x in &[0.05, 1.0, 3.0] {
                let at = bessel_k(n, x).unwrap().value;
                let below = bessel_k(n - 1e-9, x).unwrap().value;
                let above = bessel_k(n + 1e-9, x).unwrap().value;
                assert_relative_eq!(at, below, max_relative = 1e-8);
                assert_relative_eq!(at, above, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn bessel_underflow_and_overflow_flags() {
        let k = bessel_k(1.0, 800.0).unwrap();
        assert_eq!(k.flag, SpecFunFlag::UnderflowToZero);
        assert_eq!(k.value, 0.0);
        let k = bessel_k(200.0, 1e-3).unwrap();
        assert_eq!(k.flag, SpecFunFlag::Overflow);
        assert!(k.value.is_infinite());
    }

    #[test]
    fn bessel_domain_errors() {
        assert!(bessel_k(0.0, 1.0).is_err());
        assert!(bessel_k(-1.0, 1.0).is_err());
        assert!(bessel_k(1.0, 0.0).is_err());
        assert!(bessel_k(1.0, -2.0).is_err());
        assert!(bessel_k(1.0, f64::NAN).is_err());
    }

    #[test]
    fn inv_norm_cdf_basics() {
        assert_eq!(inv_norm_cdf(0.5).unwrap(), 0.0);
        let hi = inv_norm_cdf(0.975).unwrap();
        let lo = inv_norm_cdf(0.025).unwrap();
        assert_relative_eq!(hi, 1.959_963_984_540_054, max_relative = 1e-12);
        assert_relative_eq!(lo, -hi, max_relative = 1e-12);
        assert!(inv_norm_cdf(0.0).is_err());
        assert!(inv_norm_cdf(1.0).is_err());
        assert!(inv_norm_cdf(f64::NAN).is_err());
    }
}
