//! Empirical CDFs and least-squares CDF fitting.

use alloc::vec::Vec;

use crate::dist::{ModelFamily, ModelParams};
use crate::ingest::SnapshotSeries;
use crate::numeric::CompensatedSum;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::special::{normal_cdf, IncompleteGamma};
use crate::{Error, Result};

/// Step CDF of a positive sample, with a width for every support point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EmpiricalCDF {
    support: Vec<f64>,
    probs: Vec<f64>,
    widths: Vec<f64>,
}

impl EmpiricalCDF {
    /// ECDF of a sample: sorted unique support, `F̂(s_i) = #{x ≤ s_i} / n`.
    pub fn from_sample(sample: &[f64], min_size: usize) -> Result<Self> {
        if sample.len() < min_size.max(1) {
            return Err(Error::InsufficientData(alloc::format!(
                "sample of {} values, need at least {}",
                sample.len(),
                min_size.max(1)
            )));
        }
        if let Some(bad) = sample.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(alloc::format!("sample value {bad} is not positive")));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if i + 1 < sorted.len() && sorted[i + 1] == v {
                continue;
            }
            support.push(v);
            probs.push((i + 1) as f64 / n);
        }
        Ok(Self::with_widths(support, probs))
    }

    /// ECDF given directly on a grid, e.g. exact model quantiles.
    ///
    /// Probabilities must be nondecreasing within `(0, 1]`; the last one may
    /// stay below 1 when the grid is a truncated quantile set.
    pub fn from_points(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::LengthMismatch { left: support.len(), right: probs.len() });
        }
        if support.is_empty() {
            return Err(Error::InsufficientData("empty ECDF".into()));
        }
        if support.iter().any(|s| !(*s > 0.0 && s.is_finite())) || support.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("support must be positive and strictly increasing".into()));
        }
        if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) || probs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("probabilities must be nondecreasing in (0, 1]".into()));
        }
        Ok(Self::with_widths(support, probs))
    }

    fn with_widths(support: Vec<f64>, probs: Vec<f64>) -> Self {
        let mut widths: Vec<f64> = support.windows(2).map(|w| w[1] - w[0]).collect();
        let last = widths.last().copied().unwrap_or(support[0]);
        widths.push(last);
        Self { support, probs, widths }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Probability mass at each support point.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.probs
            .iter()
            .map(|&p| {
                let m = p - prev;
                prev = p;
                m
            })
            .collect()
    }

    /// Empirical density `(F̂_i − F̂_{i−1}) / Δs_i`.
    pub fn density(&self) -> Vec<f64> {
        self.masses().iter().zip(&self.widths).map(|(m, w)| m / w).collect()
    }

    /// Sample median: the midpoint when the CDF sits exactly at 1/2, otherwise
    /// the first support point whose CDF exceeds 1/2.
    pub fn median(&self) -> f64 {
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.5 && i + 1 < self.support.len() {
                return 0.5 * (self.support[i] + self.support[i + 1]);
            }
            if p > 0.5 {
                return self.support[i];
            }
        }
        self.support[self.support.len() - 1]
    }

    /// Largest absolute deviation from a model CDF over the support (Kolmogorov-Smirnov).
    pub fn ks_distance(&self, model: &ModelParams) -> Result<f64> {
        let mut prev = 0.0;
        let mut d: f64 = 0.0;
        for (&s, &p) in self.support.iter().zip(&self.probs) {
            let f = model.cdf(s)?;
            d = d.max(libm::fabs(f - p)).max(libm::fabs(f - prev));
            prev = p;
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FitResult {
    pub params: ModelParams,
    /// Sum of squared CDF residuals at `params`.
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Sum of squared residuals between a model CDF and the ECDF.
pub fn cdf_sse(ecdf: &EmpiricalCDF, model: &ModelParams) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut ok = true;
    let mut push = |c: Result<f64>, p: f64| match c {
        Ok(c) => acc.add((c - p) * (c - p)),
        Err(_) => ok = false,
    };
    let (phi, theta) = (model.phi(), model.theta());
    match model.family() {
        ModelFamily::Gamma => {
            let Ok(g) = IncompleteGamma::new(phi) else {
                return f64::INFINITY;
            };
            for (&s, &p) in ecdf.support.iter().zip(&ecdf.probs) {
                push(g.p(s / theta), p);
            }
        }
        ModelFamily::InverseGamma => {
            let Ok(g) = IncompleteGamma::new(phi) else {
                return f64::INFINITY;
            };
            for (&s, &p) in ecdf.support.iter().zip(&ecdf.probs) {
                push(g.q(theta / s), p);
            }
        }
        ModelFamily::LogNormal => {
            for (&s, &p) in ecdf.support.iter().zip(&ecdf.probs) {
                push(Ok(normal_cdf((libm::log(s) - phi) / theta)), p);
            }
        }
        ModelFamily::Weibull => {
            for (&s, &p) in ecdf.support.iter().zip(&ecdf.probs) {
                push(Ok(-libm::expm1(-libm::pow(s / theta, phi))), p);
            }
        }
    }
    if ok {
        acc.value()
    } else {
        f64::INFINITY
    }
}

/// Method-of-moments starting point for each family.
pub fn initial_guess(ecdf: &EmpiricalCDF, family: ModelFamily) -> Result<ModelParams> {
    let masses = ecdf.masses();
    let total: f64 = masses.iter().sum();
    let weighted = |f: &dyn Fn(f64) -> f64| -> f64 {
        let mut acc = CompensatedSum::new();
        for (&s, &m) in ecdf.support.iter().zip(&masses) {
            acc.add(m * f(s));
        }
        acc.value() / total
    };
    let m = weighted(&|s| s);
    let v = weighted(&|s| (s - m) * (s - m));
    let (phi, theta) = match family {
        ModelFamily::Gamma => (m * m / v, v / m),
        ModelFamily::InverseGamma => {
            let phi = m * m / v + 2.0;
            (phi, m * (phi - 1.0))
        }
        ModelFamily::LogNormal => {
            let lm = weighted(&|s| libm::log(s));
            let lv = weighted(&|s| (libm::log(s) - lm) * (libm::log(s) - lm));
            (lm, libm::sqrt(lv))
        }
        ModelFamily::Weibull => {
            // ln(−ln(1 − F)) = φ ln s − φ ln θ
            let pts: Vec<(f64, f64)> = ecdf
                .support
                .iter()
                .zip(&ecdf.probs)
                .filter(|(_, &p)| p < 1.0)
                .map(|(&s, &p)| (libm::log(s), libm::log(-libm::log1p(-p))))
                .collect();
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let w = alloc::vec![1.0; x.len()];
            match crate::numeric::weighted_line(&x, &y, &w) {
                Some((a, b)) if b > 0.0 => (b, libm::exp(-a / b)),
                _ => (1.0, m),
            }
        }
    };
    ModelParams::new(family, phi, theta).or_else(|_| ModelParams::new(family, 1.0, ecdf.median()))
}

fn to_internal(p: &ModelParams) -> [f64; 2] {
    let phi = if p.family().positive_phi() { libm::log(p.phi()) } else { p.phi() };
    [phi, libm::log(p.theta())]
}

fn from_internal(family: ModelFamily, x: &[f64]) -> Result<ModelParams> {
    let phi = if family.positive_phi() { libm::exp(x[0]) } else { x[0] };
    ModelParams::new(family, phi, libm::exp(x[1]))
}

/// Least-squares fit of `family` to the ECDF.
///
/// Positive parameters are optimized in log space with Nelder-Mead, starting
/// from [`initial_guess`]. The returned parameters never score worse than
/// the starting point.
pub fn fit_model(ecdf: &EmpiricalCDF, family: ModelFamily) -> Result<FitResult> {
    fit_model_with(ecdf, family, &NelderMeadOptions::default())
}

pub fn fit_model_with(ecdf: &EmpiricalCDF, family: ModelFamily, opts: &NelderMeadOptions) -> Result<FitResult> {
    if ecdf.len() < 2 {
        return Err(Error::Underdetermined(alloc::format!(
            "{} support point(s) for a two-parameter {family} fit",
            ecdf.len()
        )));
    }
    let start = initial_guess(ecdf, family)?;
    let objective = |x: &[f64]| match from_internal(family, x) {
        Ok(p) => cdf_sse(ecdf, &p),
        Err(_) => f64::INFINITY,
    };
    let min = nelder_mead(objective, &to_internal(&start), opts);
    let params = from_internal(family, &min.x)?;
    Ok(FitResult { params, sse: min.f, converged: min.converged && min.f.is_finite(), iterations: min.iterations })
}

/// The four fits of one snapshot, in family order.
pub type FamilyFits = [Result<FitResult>; 4];

/// Fit every family to one snapshot; failures stay in their cell.
pub fn fit_snapshot(sample: &[f64], min_size: usize) -> FamilyFits {
    match EmpiricalCDF::from_sample(sample, min_size) {
        Ok(e) => ModelFamily::ALL.map(|f| fit_model(&e, f)),
        Err(err) => core::array::from_fn(|_| Err(err.clone())),
    }
}

/// Per-snapshot fits of all four families.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTimeSeries {
    pub times: Vec<i64>,
    pub fits: Vec<FamilyFits>,
}

impl ParamTimeSeries {
    /// Fitted parameters of one family where the fit converged.
    pub fn column(&self, family: ModelFamily) -> Vec<(i64, ModelParams)> {
        self.times
            .iter()
            .zip(&self.fits)
            .filter_map(|(&t, f)| match &f[family.index()] {
                Ok(r) if r.converged => Some((t, r.params)),
                _ => None,
            })
            .collect()
    }
}

/// Fit all four families at every trading snapshot, sequentially.
pub fn fit_all(series: &SnapshotSeries, min_size: usize) -> ParamTimeSeries {
    let (times, fits) = series.trading().map(|(t, s)| (t, fit_snapshot(s, min_size))).unzip();
    ParamTimeSeries { times, fits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    #[test]
    fn small_examples() {
        let e = EmpiricalCDF::from_sample(&[3.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(e.support(), &[1.0, 2.0, 3.0]);
        assert_eq!(e.probs(), &[1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(e.widths(), &[1.0, 1.0, 1.0]);
        let d = EmpiricalCDF::from_sample(&[5.0, 5.0, 5.0], 1).unwrap();
        assert_eq!(d.support(), &[5.0]);
        assert_eq!(d.probs(), &[1.0]);
        assert!(EmpiricalCDF::from_sample(&[1.0, 2.0], 3).is_err());
        assert!(EmpiricalCDF::from_sample(&[1.0, 0.0], 1).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(EmpiricalCDF::from_sample(&[1.0, 2.0, 3.0, 4.0], 1).unwrap().median(), 2.5);
        assert_eq!(EmpiricalCDF::from_sample(&[1.0, 2.0, 3.0], 1).unwrap().median(), 2.0);
    }

    #[test]
    fn single_point_is_underdetermined() {
        let e = EmpiricalCDF::from_sample(&[5.0, 5.0], 1).unwrap();
        for f in ModelFamily::ALL {
            assert!(matches!(fit_model(&e, f), Err(Error::Underdetermined(_))));
        }
    }

    #[test]
    fn lognormal_quantile_grid_recovered() {
        let truth = ModelParams::new(ModelFamily::LogNormal, 1.0, 0.5).unwrap();
        let probs: Vec<f64> = (1..=200).map(|i| i as f64 / 201.0).collect();
        // invert the CDF by bisection on log s
        let support: Vec<f64> = probs
            .iter()
            .map(|&p| {
                let (mut lo, mut hi) = (-10.0f64, 10.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if truth.cdf(mid.exp()).unwrap() < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (0.5 * (lo + hi)).exp()
            })
            .collect();
        let e = EmpiricalCDF::from_points(support, probs).unwrap();
        let fit = fit_model(&e, ModelFamily::LogNormal).unwrap();
        assert!(fit.converged);
        assert!((fit.params.phi() - 1.0).abs() < 1e-3);
        assert!((fit.params.theta() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn fit_never_worse_than_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ModelParams::new(ModelFamily::Gamma, 2.0, 1.5).unwrap().sampler();
        let xs: Vec<f64> = (0..300).map(|_| g.sample(&mut rng)).collect();
        let e = EmpiricalCDF::from_sample(&xs, 1).unwrap();
        for f in ModelFamily::ALL {
            let start = initial_guess(&e, f).unwrap();
            let fit = fit_model(&e, f).unwrap();
            assert!(fit.sse <= cdf_sse(&e, &start), "{f}");
        }
    }

    #[test]
    fn from_points_validation() {
        assert!(EmpiricalCDF::from_points(vec![1.0, 1.0], vec![0.5, 1.0]).is_err());
        assert!(EmpiricalCDF::from_points(vec![1.0, 2.0], vec![0.6, 0.5]).is_err());
        assert!(EmpiricalCDF::from_points(vec![1.0, 2.0], vec![0.5, 0.9]).is_ok());
    }
}
