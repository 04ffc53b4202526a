//! Derivative-free Nelder-Mead minimization for small parameter vectors.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Converged once the spread of simplex values is below `f_tol · |f_best|`.
    pub f_tol: f64,
    /// Converged once every vertex is within `x_tol` of the best one.
    pub x_tol: f64,
    /// Initial step along each coordinate.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 500, f_tol: 1e-10, x_tol: 1e-10, step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` from `x0`. Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i] == 0.0 { opts.step } else { opts.step * libm::fabs(v[i]).max(1.0) };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        // stable sort keeps ties in vertex order, so runs are reproducible
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];
        let (fb, fw) = (values[best], values[worst]);
        let diameter = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (fw - fb) <= opts.f_tol * libm::fabs(fb) + 1e-30 || diameter < opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let point = |out: &mut Vec<f64>, coef: f64, simplex: &Vec<Vec<f64>>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&simplex[worst]) {
                *o = c + coef * (w - c);
            }
        };

        point(&mut trial, -1.0, &simplex);
        let fr = eval(&trial);
        if fr < fb {
            point(&mut trial2, -2.0, &simplex);
            let fe = eval(&trial2);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }
        let (coef, target) = if fr < fw { (-0.5, fr) } else { (0.5, fw) };
        point(&mut trial2, coef, &simplex);
        let fc = eval(&trial2);
        if fc < target {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            values[i] = eval(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[best].clone(), f: values[best], iterations, converged }
}
