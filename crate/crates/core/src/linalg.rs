//! Dense least squares via Householder QR.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Solve `min ‖A x − b‖₂` for a row-major `rows × cols` matrix.
///
/// Returns [`Error::RankDeficient`] when a diagonal entry of R is negligible
/// relative to the largest column norm.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != rows * cols {
        return Err(Error::LengthMismatch { left: a.len(), right: rows * cols });
    }
    if b.len() != rows {
        return Err(Error::LengthMismatch { left: b.len(), right: rows });
    }
    if rows < cols {
        return Err(Error::RankDeficient);
    }
    let mut m = a.to_vec();
    let mut y = b.to_vec();
    let at = |m: &Vec<f64>, i: usize, j: usize| m[i * cols + j];
    let scale =
        (0..cols).map(|j| libm::sqrt((0..rows).map(|i| at(&m, i, j) * at(&m, i, j)).sum::<f64>())).fold(0.0, f64::max);
    let mut v = vec![0.0; rows];
    for k in 0..cols {
        let norm = libm::sqrt((k..rows).map(|i| at(&m, i, k) * at(&m, i, k)).sum::<f64>());
        if norm <= 1e-13 * scale || norm == 0.0 {
            return Err(Error::RankDeficient);
        }
        let alpha = if at(&m, k, k) > 0.0 { -norm } else { norm };
        for i in k..rows {
            v[i] = at(&m, i, k);
        }
        v[k] -= alpha;
        let vnorm2: f64 = (k..rows).map(|i| v[i] * v[i]).sum();
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i] * at(&m, i, j)).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                m[i * cols + j] -= f * v[i];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i] * y[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            y[i] -= f * v[i];
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let s: f64 = ((k + 1)..cols).map(|j| at(&m, k, j) * x[j]).sum();
        x[k] = (y[k] - s) / at(&m, k, k);
    }
    Ok(x)
}

/// Least-squares polynomial coefficients, lowest order first.
///
/// The abscissae are centred and scaled internally for conditioning, and the
/// coefficients are mapped back to powers of the raw `x`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let cols = degree + 1;
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let center = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let mut a = Vec::with_capacity(x.len() * cols);
    for &xi in x {
        let u = (xi - center) / half;
        let mut p = 1.0;
        for _ in 0..cols {
            a.push(p);
            p *= u;
        }
    }
    let c = least_squares(&a, x.len(), cols, y)?;
    // expand Σ c_j ((x − center)/half)^j into powers of x
    let mut out = vec![0.0; cols];
    let mut basis = vec![0.0; cols];
    basis[0] = 1.0;
    for (j, &cj) in c.iter().enumerate() {
        if j > 0 {
            for i in (0..=j).rev() {
                let shifted = if i > 0 { basis[i - 1] } else { 0.0 };
                basis[i] = (shifted - center * basis[i]) / half;
            }
        }
        for i in 0..=j {
            out[i] += cj * basis[i];
        }
    }
    Ok(out)
}

/// Evaluate a polynomial given lowest-order-first coefficients.
pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Derivative coefficients, lowest order first.
pub fn polyder(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let c = polyfit(&x, &y, 1).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_interpolation() {
        let truth = [0.5, -1.0, 0.25, 0.125];
        let x: std::vec::Vec<f64> = (0..10).map(|i| i as f64 * 0.7).collect();
        let y: std::vec::Vec<f64> = x.iter().map(|&v| polyval(&truth, v)).collect();
        let c = polyfit(&x, &y, 3).unwrap();
        for (a, b) in c.iter().zip(truth) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(polyder(&truth), std::vec![-1.0, 0.5, 0.375]);
    }

    #[test]
    fn rank_deficiency_detected() {
        assert_eq!(polyfit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 1), Err(Error::RankDeficient));
        assert_eq!(polyfit(&[1.0, 2.0], &[1.0, 2.0], 2), Err(Error::RankDeficient));
    }
}
