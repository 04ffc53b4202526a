//! Small numerical helpers shared by the estimators.

use alloc::vec::Vec;

/// Neumaier-compensated accumulator.
///
/// Summation order still matters for the last bit, but the compensated result
/// is far less sensitive to it than a naive running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, carry: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(xs.iter().copied());
    acc.value()
}

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    sum(xs) / xs.len() as f64
}

/// Population (biased) variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut acc = CompensatedSum::new();
    acc.extend(xs.iter().map(|&x| (x - m) * (x - m)));
    acc.value() / xs.len() as f64
}

/// Mean and population std; rescales when the direct sums overflow.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let (m, s) = (mean(xs), libm::sqrt(variance(xs)));
    if m.is_finite() && s.is_finite() {
        return (m, s);
    }
    let scale = xs.iter().fold(0.0f64, |a, &x| a.max(libm::fabs(x)));
    if !scale.is_finite() {
        return (m, s);
    }
    let scaled: Vec<f64> = xs.iter().map(|x| x / scale).collect();
    (scale * mean(&scaled), scale * libm::sqrt(variance(&scaled)))
}

/// Least-squares slope of `y = b x` through the origin.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (&xi, &yi) in x.iter().zip(y) {
        num.add(xi * yi);
        den.add(xi * xi);
    }
    num.value() / den.value()
}

/// Weighted least-squares line `y = a + b x`; returns `(a, b)`.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let mut sw = CompensatedSum::new();
    let mut sx = CompensatedSum::new();
    let mut sy = CompensatedSum::new();
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sw.add(wi);
        sx.add(wi * xi);
        sy.add(wi * yi);
    }
    let sw = sw.value();
    if !(sw > 0.0) {
        return None;
    }
    let (mx, my) = (sx.value() / sw, sy.value() / sw);
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sxx.add(wi * (xi - mx) * (xi - mx));
        sxy.add(wi * (xi - mx) * (yi - my));
    }
    let sxx = sxx.value();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy.value() / sxx;
    Some((my - b * mx, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&xs), 2.0);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: std::vec::Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b) = weighted_line(&x, &y, &[1.0, 2.0, 1.0, 3.0]).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14);
        assert!((slope_through_origin(&x, &x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn huge_values_do_not_overflow() {
        let (m, s) = mean_std(&[1e308, 1.5e308, 1.7e308]);
        assert!(m.is_finite() && s.is_finite());
        assert!((m / 1.4e308 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn population_variance() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }
}
