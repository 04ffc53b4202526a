//! Special functions needed by the four model families.
//!
//! | Function | Definition |
//! |----------|------------|
//! | [`ln_gamma`] | ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9) |
//! | [`gamma_p`] | regularized lower incomplete gamma P(a, x) |
//! | [`gamma_q`] | regularized upper incomplete gamma Q(a, x) = 1 − P(a, x) |
//! | [`erf`], [`erfc`] | error function (delegates to `libm`) |
//! | [`normal_cdf`] | standard normal CDF |
//! | [`digamma`], [`trigamma`] | ψ(x) and ψ′(x) for x > 0 |
//!
//! The incomplete gamma switches between the power series (x < a + 1) and the
//! Lentz continued fraction (x ≥ a + 1); both converge to ~1e-15 relative in
//! their own region.

use core::f64::consts::PI;

use crate::{Error, Result};

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function.
///
/// Uses the reflection formula below 1/2, so it also accepts negative
/// non-integer arguments, returning ln|Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return libm::log(PI / libm::fabs(libm::sin(PI * x))) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * libm::log(2.0 * PI) + (x + 0.5) * libm::log(t) - t + libm::log(a)
}

fn check_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() || !(x >= 0.0) {
        return Err(Error::Domain(alloc::format!("incomplete gamma needs a > 0, x >= 0 (a={a}, x={x})")));
    }
    Ok(())
}

/// ln of the common prefactor x^a e^{-x} / Γ(a), given `lng = ln Γ(a)`.
fn ln_prefactor(a: f64, x: f64, lng: f64) -> f64 {
    a * libm::log(x) - x - lng
}

/// Series for P(a, x); valid for x < a + 1.
fn p_series(a: f64, x: f64, lng: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if libm::fabs(del) < libm::fabs(sum) * EPS {
            return Ok(sum * libm::exp(ln_prefactor(a, x, lng)));
        }
    }
    Err(Error::NoConvergence(alloc::format!("gamma series a={a} x={x}")))
}

/// Modified Lentz continued fraction for Q(a, x); valid for x ≥ a + 1.
fn q_continued_fraction(a: f64, x: f64, lng: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < EPS {
            return Ok(libm::exp(ln_prefactor(a, x, lng)) * h);
        }
    }
    Err(Error::NoConvergence(alloc::format!("gamma continued fraction a={a} x={x}")))
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check_args(a, x)?;
    IncompleteGamma::new_unchecked(a).p(x)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check_args(a, x)?;
    IncompleteGamma::new_unchecked(a).q(x)
}

/// P(a, ·) and Q(a, ·) for a fixed shape, with ln Γ(a) computed once.
#[derive(Debug, Clone, Copy)]
pub struct IncompleteGamma {
    a: f64,
    lng: f64,
}

impl IncompleteGamma {
    pub fn new(a: f64) -> Result<Self> {
        check_args(a, 0.0)?;
        Ok(Self::new_unchecked(a))
    }

    fn new_unchecked(a: f64) -> Self {
        Self { a, lng: ln_gamma(a) }
    }

    pub fn p(&self, x: f64) -> Result<f64> {
        let a = self.a;
        if !(x >= 0.0) {
            check_args(a, x)?;
        }
        if x == 0.0 {
            Ok(0.0)
        } else if x.is_infinite() {
            Ok(1.0)
        } else if x < a + 1.0 {
            p_series(a, x, self.lng)
        } else {
            Ok(1.0 - q_continued_fraction(a, x, self.lng)?)
        }
    }

    pub fn q(&self, x: f64) -> Result<f64> {
        let a = self.a;
        if !(x >= 0.0) {
            check_args(a, x)?;
        }
        if x == 0.0 {
            Ok(1.0)
        } else if x.is_infinite() {
            Ok(0.0)
        } else if x < a + 1.0 {
            Ok(1.0 - p_series(a, x, self.lng)?)
        } else {
            q_continued_fraction(a, x, self.lng)
        }
    }
}

/// Error function (musl `erf` through `libm`).
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function, accurate in the far right tail.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF Φ(z), accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / core::f64::consts::SQRT_2)
}

/// Digamma ψ(x) for x > 0: upward recurrence to x ≥ 10, then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let series = x2
        * (1.0 / 12.0
            - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 * (1.0 / 240.0 - x2 * (1.0 / 132.0 - x2 * 691.0 / 32760.0)))));
    acc + libm::log(x) - 0.5 / x - series
}

/// Trigamma ψ′(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let ix = 1.0 / x;
    let x2 = ix * ix;
    let series = ix
        + 0.5 * x2
        + ix * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))));
    acc + series
}
