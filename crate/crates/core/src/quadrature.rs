//! Adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Used as an independent numerical oracle for densities, CDFs and moments,
//! so it deliberately knows nothing about the model families.

use alloc::vec::Vec;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = libm::fabs(fc) * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (lo, hi) = (f(c - dx), f(c + dx));
        kron += WGK[j] * (lo + hi);
        abs += WGK[j] * (libm::fabs(lo) + libm::fabs(hi));
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    (kron * h, libm::fabs((kron - gauss) * h), abs * libm::fabs(h))
}

const MAX_INTERVALS: usize = 200_000;

/// Integrate `f` over the finite interval `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut stack: Vec<(f64, f64, f64, usize)> = Vec::new();
    stack.push((a, b, tol, 0));
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut intervals = 0usize;
    while let Some((lo, hi, t, depth)) = stack.pop() {
        intervals += 1;
        if intervals > MAX_INTERVALS {
            return Err(Error::NoConvergence(alloc::format!(
                "quadrature on [{a}, {b}] exceeded {MAX_INTERVALS} intervals"
            )));
        }
        let (val, err, abs) = gk15(&f, lo, hi);
        if !val.is_finite() {
            return Err(Error::NoConvergence(alloc::format!("non-finite integrand on [{lo}, {hi}]")));
        }
        // an error estimate at round-off level cannot be improved by splitting
        if err <= t
            || err <= 50.0 * f64::EPSILON * abs
            || depth >= 60
            || (hi - lo) <= 1e-15 * (libm::fabs(lo) + libm::fabs(hi))
        {
            if err > t && depth >= 60 {
                return Err(Error::NoConvergence(alloc::format!("quadrature on [{lo}, {hi}]")));
            }
            let y = val - comp;
            let s = total + y;
            comp = (s - total) - y;
            total = s;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t, depth + 1));
            stack.push((mid, hi, 0.5 * t, depth + 1));
        }
    }
    Ok(total)
}

/// Integrate `f` over `[a, ∞)` via the substitution `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64> {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrate `f` over the whole real line, splitting at `center`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, center: f64, tol: f64) -> Result<f64> {
    let right = integrate_to_infinity(&f, center, 0.5 * tol)?;
    let left = integrate_to_infinity(|u| f(2.0 * center - u), center, 0.5 * tol)?;
    Ok(left + right)
}

/// Integrate a function of `s` over `(0, ∞)` by working in `u = ln s`,
/// which turns power-law tails into exponential ones.
pub fn integrate_positive_half_line<F: Fn(f64) -> f64>(f: F, log_center: f64, tol: f64) -> Result<f64> {
    integrate_real_line(
        |u| {
            let s = libm::exp(u);
            if s == 0.0 || !s.is_finite() {
                return 0.0;
            }
            f(s) * s
        },
        log_center,
        tol,
    )
}
