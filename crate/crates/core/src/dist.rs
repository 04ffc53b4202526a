//! The four biparametric families and their closed forms.
//!
//! Every family is written with a shape-like `phi` and a scale-like `theta`:
//!
//! | Family | density p(s) | CDF |
//! |--------|--------------|-----|
//! | Gamma | s^{φ−1} e^{−s/θ} / (θ^φ Γ(φ)) | P(φ, s/θ) |
//! | InverseGamma | θ^φ s^{−φ−1} e^{−θ/s} / Γ(φ) | Q(φ, θ/s) |
//! | LogNormal | exp(−(ln s − φ)² / 2θ²) / (√(2π) θ s) | Φ((ln s − φ)/θ) |
//! | Weibull | (φ/θ^φ) s^{φ−1} e^{−(s/θ)^φ} | 1 − e^{−(s/θ)^φ} |
//!
//! `s` is treated as a dimensionless positive real; rescaling the data
//! rescales θ (or shifts φ for the log-normal) and nothing else.

use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::special::{digamma, gamma_p, gamma_q, ln_gamma, normal_cdf, trigamma};
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ModelFamily {
    Gamma,
    InverseGamma,
    LogNormal,
    Weibull,
}

impl ModelFamily {
    /// All families in the deterministic tie-break order.
    pub const ALL: [ModelFamily; 4] =
        [ModelFamily::Gamma, ModelFamily::InverseGamma, ModelFamily::LogNormal, ModelFamily::Weibull];

    pub const fn index(self) -> usize {
        match self {
            ModelFamily::Gamma => 0,
            ModelFamily::InverseGamma => 1,
            ModelFamily::LogNormal => 2,
            ModelFamily::Weibull => 3,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ModelFamily::Gamma => "gamma",
            ModelFamily::InverseGamma => "inverse_gamma",
            ModelFamily::LogNormal => "log_normal",
            ModelFamily::Weibull => "weibull",
        }
    }

    /// Whether `phi` is constrained to be positive (it is a free location for the log-normal).
    pub const fn positive_phi(self) -> bool {
        !matches!(self, ModelFamily::LogNormal)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Domain(alloc::format!("unknown model family `{s}`")))
    }
}

/// A validated `(family, phi, theta)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ModelParams {
    family: ModelFamily,
    phi: f64,
    theta: f64,
}

/// A raw moment `F_n = <s^n>`, or the statement that the integral does not exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Divergent,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Divergent => None,
        }
    }
}

/// F_n together with its first and second partial derivatives in (φ, θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPartials {
    pub value: f64,
    pub d_phi: f64,
    pub d_theta: f64,
    pub d_phi_phi: f64,
    pub d_theta_theta: f64,
    pub d_phi_theta: f64,
}

impl ModelParams {
    pub fn new(family: ModelFamily, phi: f64, theta: f64) -> Result<Self> {
        let ok = phi.is_finite() && theta.is_finite() && theta > 0.0 && (!family.positive_phi() || phi > 0.0);
        if ok {
            Ok(Self { family, phi, theta })
        } else {
            Err(Error::InvalidParams { family: family.name(), phi, theta })
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn check_support(s: f64) -> Result<()> {
        if s > 0.0 && !s.is_nan() {
            Ok(())
        } else {
            Err(Error::Domain(alloc::format!("density support is s > 0, got {s}")))
        }
    }

    /// Log-density, finite or −∞ for every s > 0.
    pub fn ln_pdf(&self, s: f64) -> Result<f64> {
        Self::check_support(s)?;
        Ok(self.ln_pdf_unchecked(s))
    }

    fn ln_pdf_unchecked(&self, s: f64) -> f64 {
        let (phi, theta) = (self.phi, self.theta);
        let ln_s = libm::log(s);
        match self.family {
            ModelFamily::Gamma => (phi - 1.0) * ln_s - phi * libm::log(theta) - ln_gamma(phi) - s / theta,
            ModelFamily::InverseGamma => phi * libm::log(theta) - ln_gamma(phi) - (phi + 1.0) * ln_s - theta / s,
            ModelFamily::LogNormal => {
                let z = (ln_s - phi) / theta;
                -LN_SQRT_2PI - libm::log(theta) - ln_s - 0.5 * z * z
            }
            ModelFamily::Weibull => {
                let r = libm::pow(s / theta, phi);
                libm::log(phi) - libm::log(theta) + (phi - 1.0) * (ln_s - libm::log(theta)) - r
            }
        }
    }

    /// Log-density of `ln S` at `u`, finite or −∞ for every finite `u`.
    ///
    /// Equal to `ln_pdf(e^u) + u`, but never forms `e^u`, so it stays usable
    /// far into power-law tails.
    pub fn ln_pdf_log_scale(&self, u: f64) -> f64 {
        let (phi, theta) = (self.phi, self.theta);
        match self.family {
            ModelFamily::Gamma => phi * (u - libm::log(theta)) - ln_gamma(phi) - libm::exp(u - libm::log(theta)),
            ModelFamily::InverseGamma => phi * (libm::log(theta) - u) - ln_gamma(phi) - libm::exp(libm::log(theta) - u),
            ModelFamily::LogNormal => {
                let z = (u - phi) / theta;
                -LN_SQRT_2PI - libm::log(theta) - 0.5 * z * z
            }
            ModelFamily::Weibull => {
                let v = phi * (u - libm::log(theta));
                libm::log(phi) + v - libm::exp(v)
            }
        }
    }

    /// Density; evaluated in log space and exponentiated last.
    pub fn pdf(&self, s: f64) -> Result<f64> {
        Ok(libm::exp(self.ln_pdf(s)?))
    }

    pub fn cdf(&self, s: f64) -> Result<f64> {
        Self::check_support(s)?;
        self.cdf_unchecked(s)
    }

    fn cdf_unchecked(&self, s: f64) -> Result<f64> {
        let (phi, theta) = (self.phi, self.theta);
        match self.family {
            ModelFamily::Gamma => gamma_p(phi, s / theta),
            ModelFamily::InverseGamma => gamma_q(phi, theta / s),
            ModelFamily::LogNormal => Ok(normal_cdf((libm::log(s) - phi) / theta)),
            ModelFamily::Weibull => Ok(-libm::expm1(-libm::pow(s / theta, phi))),
        }
    }

    /// Raw moment `<s^n>` in closed form. `n = 0` gives 1.
    pub fn moment(&self, n: u32) -> Moment {
        let (phi, theta) = (self.phi, self.theta);
        let nf = n as f64;
        match self.family {
            ModelFamily::Gamma => {
                let mut v = 1.0;
                for j in 0..n {
                    v *= theta * (phi + j as f64);
                }
                Moment::Finite(v)
            }
            ModelFamily::InverseGamma => {
                if phi <= nf {
                    return Moment::Divergent;
                }
                let mut v = 1.0;
                for j in 1..=n {
                    v *= theta / (phi - j as f64);
                }
                Moment::Finite(v)
            }
            ModelFamily::LogNormal => Moment::Finite(libm::exp(nf * phi + 0.5 * nf * nf * theta * theta)),
            ModelFamily::Weibull => Moment::Finite(libm::exp(nf * libm::log(theta) + ln_gamma(1.0 + nf / phi))),
        }
    }

    /// Closed-form partial derivatives of `F_n(φ, θ)`.
    pub fn moment_partials(&self, n: u32) -> Result<MomentPartials> {
        let value = self.moment(n).finite().ok_or(Error::DivergentMoment { order: n })?;
        let (phi, theta) = (self.phi, self.theta);
        let nf = n as f64;
        // θ enters as θ^n for the three scale families.
        let scale_partials = |g1: f64, g2: f64| MomentPartials {
            value,
            d_phi: value * g1,
            d_theta: value * nf / theta,
            d_phi_phi: value * (g1 * g1 + g2),
            d_theta_theta: value * nf * (nf - 1.0) / (theta * theta),
            d_phi_theta: value * g1 * nf / theta,
        };
        Ok(match self.family {
            ModelFamily::Gamma => {
                // ln F = n ln θ + Σ_{j<n} ln(φ + j)
                let g1: f64 = (0..n).map(|j| 1.0 / (phi + j as f64)).sum();
                let g2: f64 = (0..n).map(|j| -1.0 / ((phi + j as f64) * (phi + j as f64))).sum();
                scale_partials(g1, g2)
            }
            ModelFamily::InverseGamma => {
                // ln F = n ln θ − Σ_{1≤j≤n} ln(φ − j)
                let g1: f64 = (1..=n).map(|j| -1.0 / (phi - j as f64)).sum();
                let g2: f64 = (1..=n).map(|j| 1.0 / ((phi - j as f64) * (phi - j as f64))).sum();
                scale_partials(g1, g2)
            }
            ModelFamily::Weibull => {
                // ln F = n ln θ + ln Γ(u),  u = 1 + n/φ
                let u = 1.0 + nf / phi;
                let du = -nf / (phi * phi);
                let d2u = 2.0 * nf / (phi * phi * phi);
                let g1 = digamma(u) * du;
                let g2 = trigamma(u) * du * du + digamma(u) * d2u;
                scale_partials(g1, g2)
            }
            ModelFamily::LogNormal => MomentPartials {
                value,
                d_phi: nf * value,
                d_theta: nf * nf * theta * value,
                d_phi_phi: nf * nf * value,
                d_theta_theta: (nf * nf + libm::pow(nf, 4.0) * theta * theta) * value,
                d_phi_theta: nf * nf * nf * theta * value,
            },
        })
    }

    /// A reusable sampler for this distribution.
    pub fn sampler(&self) -> Sampler {
        let inner = match self.family {
            ModelFamily::Gamma => SamplerKind::Gamma(Gamma::new(self.phi, self.theta).expect("validated")),
            ModelFamily::InverseGamma => {
                SamplerKind::InverseGamma(Gamma::new(self.phi, 1.0).expect("validated"), self.theta)
            }
            ModelFamily::LogNormal => SamplerKind::LogNormal(self.phi, self.theta),
            ModelFamily::Weibull => SamplerKind::Weibull(1.0 / self.phi, self.theta),
        };
        Sampler(inner)
    }
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Gamma(Gamma<f64>),
    InverseGamma(Gamma<f64>, f64),
    LogNormal(f64, f64),
    Weibull(f64, f64),
}

/// Draws from one of the four families.
///
/// The inverse-Gamma is the reciprocal of a Gamma variate (Marsaglia-Tsang),
/// and the Weibull uses inversion of its closed-form CDF.
#[derive(Debug, Clone, Copy)]
pub struct Sampler(SamplerKind);

impl Distribution<f64> for Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.0 {
            SamplerKind::Gamma(g) => g.sample(rng),
            SamplerKind::InverseGamma(g, theta) => theta / g.sample(rng),
            SamplerKind::LogNormal(mu, sd) => {
                let z: f64 = StandardNormal.sample(rng);
                libm::exp(mu + sd * z)
            }
            SamplerKind::Weibull(inv_shape, scale) => {
                // 1 - u lies in (0, 1] so the log is finite
                let u: f64 = rng.random();
                scale * libm::pow(-libm::log(1.0 - u), inv_shape)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_positive_half_line};
    use proptest::prelude::*;

    fn p(f: ModelFamily, phi: f64, theta: f64) -> ModelParams {
        ModelParams::new(f, phi, theta).unwrap()
    }

    #[test]
    fn pdf_reference_points() {
        let e1 = (-1.0f64).exp();
        assert!((p(ModelFamily::Gamma, 1.0, 1.0).pdf(1.0).unwrap() - e1).abs() < 1e-15);
        assert!((p(ModelFamily::InverseGamma, 1.0, 1.0).pdf(1.0).unwrap() - e1).abs() < 1e-15);
        let ln = p(ModelFamily::LogNormal, 0.0, 1.0).pdf(1.0).unwrap();
        assert!((ln - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn cdf_reference_points() {
        let w = p(ModelFamily::Weibull, 2.0, 3.0).cdf(3.0).unwrap();
        assert!((w - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let l = p(ModelFamily::LogNormal, 0.7, 0.4).cdf(0.7f64.exp()).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gamma_cdf_matches_quadrature() {
        let g = p(ModelFamily::Gamma, 2.5, 1.3);
        let oracle = integrate(|s| if s > 0.0 { g.pdf(s).unwrap() } else { 0.0 }, 0.0, 2.0, 1e-14).unwrap();
        assert!((g.cdf(2.0).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn moment_reference_values() {
        let ln = p(ModelFamily::LogNormal, 0.0, 1.0).moment(1).finite().unwrap();
        let oracle = integrate_positive_half_line(
            |s| s * (-(s.ln().powi(2)) / 2.0).exp() / ((2.0 * core::f64::consts::PI).sqrt() * s),
            0.0,
            1e-12,
        )
        .unwrap();
        assert!((ln - 0.5f64.exp()).abs() < 1e-14);
        assert!((ln - oracle).abs() < 1e-6 * oracle);
        assert_eq!(p(ModelFamily::InverseGamma, 1.5, 2.0).moment(2), Moment::Divergent);
        assert_eq!(p(ModelFamily::Gamma, 3.0, 2.0).moment(1), Moment::Finite(6.0));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(ModelParams::new(ModelFamily::Gamma, 0.0, 1.0).is_err());
        assert!(ModelParams::new(ModelFamily::Weibull, 1.0, -1.0).is_err());
        assert!(ModelParams::new(ModelFamily::LogNormal, -3.0, 1.0).is_ok());
        assert!(ModelParams::new(ModelFamily::LogNormal, 0.0, 0.0).is_err());
        let g = p(ModelFamily::Gamma, 2.0, 1.0);
        assert!(g.pdf(0.0).is_err());
        assert!(g.cdf(-1.0).is_err());
        assert!(g.pdf(f64::NAN).is_err());
    }

    #[test]
    fn log_scale_density_matches_the_change_of_variables() {
        for f in ModelFamily::ALL {
            let m = p(f, 1.7, 0.8);
            for s in [1e-3, 0.2, 1.0, 3.5, 40.0] {
                let u = libm::log(s);
                let want = m.ln_pdf(s).unwrap() + u;
                assert!((m.ln_pdf_log_scale(u) - want).abs() <= 1e-12 * want.abs().max(1.0), "{f} at {s}");
            }
        }
        let ig = p(ModelFamily::InverseGamma, 2.0, 1.0);
        assert!(ig.ln_pdf_log_scale(5000.0).is_finite());
    }

    #[test]
    fn inverse_gamma_vanishes_at_origin() {
        let ig = p(ModelFamily::InverseGamma, 3.0, 5.0);
        assert_eq!(ig.pdf(1e-300).unwrap(), 0.0);
        assert!(ig.pdf(1e-3).unwrap().is_finite());
    }

    #[test]
    fn inverse_gamma_power_tail() {
        let (phi, theta) = (0.97, 2.0);
        let ig = p(ModelFamily::InverseGamma, phi, theta);
        let limit = phi * theta.ln() - ln_gamma(phi);
        let mut prev = f64::INFINITY;
        for &s in &[1e3, 1e5, 1e7, 1e9] {
            let gap = (ig.ln_pdf(s).unwrap() + (phi + 1.0) * s.ln() - limit).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn family_names_round_trip() {
        for f in ModelFamily::ALL {
            assert_eq!(f.name().parse::<ModelFamily>().unwrap(), f);
        }
        assert!("pareto".parse::<ModelFamily>().is_err());
    }

    fn family() -> impl Strategy<Value = ModelFamily> {
        prop_oneof![
            Just(ModelFamily::Gamma),
            Just(ModelFamily::InverseGamma),
            Just(ModelFamily::LogNormal),
            Just(ModelFamily::Weibull)
        ]
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_derivative_is_pdf(f in family(), phi in 0.3f64..8.0, theta in 0.2f64..5.0, s1 in 0.05f64..20.0, ds in 0.0f64..5.0) {
            let m = p(f, phi, theta);
            let (c1, c2) = (m.cdf(s1).unwrap(), m.cdf(s1 + ds).unwrap());
            prop_assert!(c2 >= c1);
            prop_assert!((0.0..=1.0).contains(&c1));
            let h = 1e-6 * s1;
            let fd = (m.cdf(s1 + h).unwrap() - m.cdf(s1 - h).unwrap()) / (2.0 * h);
            let dens = m.pdf(s1).unwrap();
            if dens > 1e-6 {
                prop_assert!((fd - dens).abs() <= 1e-4 * dens, "fd={} pdf={}", fd, dens);
            }
        }

        #[test]
        fn pdf_normalizes(f in family(), phi in 0.4f64..8.0, theta in 0.2f64..4.0) {
            let m = p(f, phi, theta);
            let center = match f {
                ModelFamily::LogNormal => phi,
                _ => theta.ln(),
            };
            let total = integrate_positive_half_line(|s| m.pdf(s).unwrap(), center, 1e-10).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-6, "total={}", total);
        }
    }
}
