//! Langevin simulation, analytic Ornstein-Uhlenbeck moments, the induced
//! moment SDE of a parametric density, and the synthetic snapshot generator.
//!
//! All randomness comes from ChaCha8 substreams of one `u64` seed, so every
//! path is reproducible independently of how paths are scheduled.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::detrend::DailyPattern;
use crate::dist::{ModelFamily, ModelParams};
use crate::ingest::{intraday_minute, Mask, SnapshotSeries, TradingCalendar};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Independent generator number `stream` derived from `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `dx = D₁(x) dt + √D₂(x) dW`.
#[derive(Debug, Clone, Copy)]
pub struct LangevinSpec1D<D, G> {
    pub drift: D,
    pub diffusion: G,
    pub x0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    /// Substream of `seed` that drives the noise.
    pub stream: u64,
}

/// Euler-Maruyama path of length `n_steps + 1`.
pub fn euler_maruyama<D, G>(spec: &LangevinSpec1D<D, G>) -> Result<Vec<f64>>
where
    D: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(spec.dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let mut rng = substream(spec.seed, spec.stream);
    let sqrt_dt = libm::sqrt(spec.dt);
    let mut path = Vec::with_capacity(spec.n_steps + 1);
    let mut x = spec.x0;
    path.push(x);
    for step in 0..spec.n_steps {
        let d2 = (spec.diffusion)(x);
        if d2 < 0.0 {
            return Err(Error::NegativeDiffusion { step, state: x, value: d2 });
        }
        let dw = sqrt_dt * normal(&mut rng);
        x = x + (spec.drift)(x) * spec.dt + libm::sqrt(d2) * dw;
        if !x.is_finite() {
            return Err(Error::NonFiniteState(step + 1));
        }
        path.push(x);
    }
    Ok(path)
}

/// `dφ = h₁ dt + g₁₁ dW₁ + g₁₂ dW₂`, `dθ = h₂ dt + g₂₁ dW₁ + g₂₂ dW₂`.
///
/// `W₁` uses substream 0 of `seed` and `W₂` substream 1, so a decoupled
/// system reproduces two 1D runs bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct CoupledLangevinSpec<H, G> {
    pub drift: H,
    pub diffusion: G,
    pub x0: (f64, f64),
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

#[inline]
fn coupled_step<H, G>(
    spec: &CoupledLangevinSpec<H, G>,
    (phi, theta): (f64, f64),
    dt: f64,
    dw1: f64,
    dw2: f64,
) -> (f64, f64)
where
    H: Fn(f64, f64) -> (f64, f64),
    G: Fn(f64, f64) -> [[f64; 2]; 2],
{
    let (h1, h2) = (spec.drift)(phi, theta);
    let g = (spec.diffusion)(phi, theta);
    (phi + h1 * dt + g[0][0] * dw1 + g[0][1] * dw2, theta + h2 * dt + g[1][0] * dw1 + g[1][1] * dw2)
}

pub fn simulate_coupled<H, G>(spec: &CoupledLangevinSpec<H, G>) -> Result<CoupledPath>
where
    H: Fn(f64, f64) -> (f64, f64),
    G: Fn(f64, f64) -> [[f64; 2]; 2],
{
    if !(spec.dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let mut r1 = substream(spec.seed, 0);
    let mut r2 = substream(spec.seed, 1);
    let sqrt_dt = libm::sqrt(spec.dt);
    let mut path = CoupledPath { phi: vec![spec.x0.0], theta: vec![spec.x0.1] };
    let mut state = spec.x0;
    for step in 0..spec.n_steps {
        let dw1 = sqrt_dt * normal(&mut r1);
        let dw2 = sqrt_dt * normal(&mut r2);
        state = coupled_step(spec, state, spec.dt, dw1, dw2);
        if !(state.0.is_finite() && state.1.is_finite()) {
            return Err(Error::NonFiniteState(step + 1));
        }
        path.phi.push(state.0);
        path.theta.push(state.1);
    }
    Ok(path)
}

/// OU process `dφ = −k(φ − φ_f) dt + σ dW` started at `φ₀` at time `t₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OuAnalytic {
    pub k: f64,
    pub sigma: f64,
    pub phi_f: f64,
    pub phi0: f64,
    pub t0: f64,
}

impl OuAnalytic {
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.k)
    }

    /// Exact transition over `dt` driven by the standard normal `xi`.
    #[inline]
    pub fn exact_step(&self, x: f64, dt: f64, xi: f64) -> f64 {
        let decay = libm::exp(-self.k * dt);
        let sd = libm::sqrt(self.stationary_variance() * -libm::expm1(-2.0 * self.k * dt));
        self.phi_f + (x - self.phi_f) * decay + sd * xi
    }
}

/// Closed-form mean and variance at time `t ≥ t₀`.
pub fn ou_mean_var(a: &OuAnalytic, t: f64) -> Result<(f64, f64)> {
    if !(a.k > 0.0) {
        return Err(Error::NotMeanReverting(a.k));
    }
    if t < a.t0 {
        return Err(Error::Domain(alloc::format!("t = {t} precedes t0 = {}", a.t0)));
    }
    let s = t - a.t0;
    let mean = a.phi0 * libm::exp(-a.k * s) + a.phi_f * -libm::expm1(-a.k * s);
    let var = a.stationary_variance() * -libm::expm1(-2.0 * a.k * s);
    Ok((mean, var))
}

/// Exact OU samples on a regular grid starting from `phi0`.
pub fn simulate_ou_exact(a: &OuAnalytic, dt: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 0);
    let mut x = a.phi0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        x = a.exact_step(x, dt, normal(&mut rng));
    }
    out
}

/// Mean, variance and their standard errors of an ensemble at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EnsembleStats {
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
}

pub fn ensemble_stats(xs: &[f64]) -> EnsembleStats {
    let n = xs.len() as f64;
    let mut s = CompensatedSum::new();
    s.extend(xs.iter().copied());
    let mean = s.value() / n;
    let mut m2 = CompensatedSum::new();
    let mut m4 = CompensatedSum::new();
    for &x in xs {
        let d = (x - mean) * (x - mean);
        m2.add(d);
        m4.add(d * d);
    }
    let variance = m2.value() / (n - 1.0);
    let mu4 = m4.value() / n;
    EnsembleStats {
        mean,
        variance,
        mean_se: libm::sqrt(variance / n),
        variance_se: libm::sqrt(((mu4 - variance * variance * (n - 3.0) / (n - 1.0)) / n).max(0.0)),
    }
}

/// Euler-Maruyama OU ensemble, recorded at the given step indices.
///
/// Path `p` uses substream `p` of `seed`.
pub fn ou_ensemble(a: &OuAnalytic, dt: f64, checkpoints: &[usize], n_paths: usize, seed: u64) -> Vec<EnsembleStats> {
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut at: Vec<Vec<f64>> = vec![Vec::with_capacity(n_paths); checkpoints.len()];
    for p in 0..n_paths {
        let spec = LangevinSpec1D {
            drift: |x: f64| -a.k * (x - a.phi_f),
            diffusion: |_| a.sigma * a.sigma,
            x0: a.phi0,
            dt,
            n_steps: last,
            seed,
            stream: p as u64,
        };
        let path = euler_maruyama(&spec).expect("constant positive diffusion");
        for (c, &i) in checkpoints.iter().enumerate() {
            at[c].push(path[i]);
        }
    }
    at.iter().map(|xs| ensemble_stats(xs)).collect()
}

/// Coefficients of `d⟨sⁿ⟩ = A dt + B dW₁ + C dW₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MomentCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Itô coefficients of the moment `F_n(φ, θ)` when `(φ, θ)` follows the coupled SDE:
///
/// ```text
/// A = F_φ h₁ + F_θ h₂ + F_φθ (g₁₁g₂₁ + g₁₂g₂₂) + ½F_φφ (g₁₁² + g₁₂²) + ½F_θθ (g₂₁² + g₂₂²)
/// B = F_φ g₁₁ + F_θ g₂₁
/// C = F_φ g₁₂ + F_θ g₂₂
/// ```
pub fn moment_sde_coefficients(
    family: ModelFamily,
    n: u32,
    state: (f64, f64),
    h: (f64, f64),
    g: [[f64; 2]; 2],
) -> Result<MomentCoefficients> {
    let p = ModelParams::new(family, state.0, state.1)?.moment_partials(n)?;
    let a = p.d_phi * h.0
        + p.d_theta * h.1
        + p.d_phi_theta * (g[0][0] * g[1][0] + g[0][1] * g[1][1])
        + 0.5 * p.d_phi_phi * (g[0][0] * g[0][0] + g[0][1] * g[0][1])
        + 0.5 * p.d_theta_theta * (g[1][0] * g[1][0] + g[1][1] * g[1][1]);
    Ok(MomentCoefficients { a, b: p.d_phi * g[0][0] + p.d_theta * g[1][0], c: p.d_phi * g[0][1] + p.d_theta * g[1][1] })
}

#[derive(Debug, Clone, Copy)]
pub struct MomentEvolutionSpec<H, G> {
    pub family: ModelFamily,
    pub order: u32,
    /// `dt` is the coarsest step; the horizon is `n_steps · dt`.
    pub coupled: CoupledLangevinSpec<H, G>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DiscrepancyLevel {
    pub dt: f64,
    /// RMS over paths of `Y_T − F_n(φ_T, θ_T)` at the horizon.
    pub rms: f64,
    /// Largest `|Y_t − F_n(φ_t, θ_t)|` over all paths and steps.
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MomentEvolutionReport {
    pub levels: Vec<DiscrepancyLevel>,
    /// `log₂(rms_i / rms_{i+1})` for successive halvings of `dt`.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log rms` against `log dt`.
    pub fitted_order: f64,
}

/// Integrate the moment SDE next to the parameter SDE and measure how far
/// it drifts from the directly evaluated moment, for `levels` successive
/// halvings of `dt` driven by the same Brownian paths.
pub fn verify_moment_evolution<H, G>(
    spec: &MomentEvolutionSpec<H, G>,
    n_paths: usize,
    levels: usize,
) -> Result<MomentEvolutionReport>
where
    H: Fn(f64, f64) -> (f64, f64),
    G: Fn(f64, f64) -> [[f64; 2]; 2],
{
    if levels == 0 || n_paths == 0 {
        return Err(Error::InsufficientData("need at least one level and one path".into()));
    }
    let c = &spec.coupled;
    let fine_steps = c.n_steps << (levels - 1);
    let fine_dt = c.dt / (1u64 << (levels - 1)) as f64;
    let moment = |s: (f64, f64)| -> Result<f64> {
        ModelParams::new(spec.family, s.0, s.1)?
            .moment(spec.order)
            .finite()
            .ok_or(Error::DivergentMoment { order: spec.order })
    };
    let mut sq = vec![CompensatedSum::new(); levels];
    let mut max = vec![0.0f64; levels];
    let (mut dw1, mut dw2) = (vec![0.0; fine_steps], vec![0.0; fine_steps]);
    for p in 0..n_paths as u64 {
        let mut r1 = substream(c.seed, 2 * p);
        let mut r2 = substream(c.seed, 2 * p + 1);
        let sd = libm::sqrt(fine_dt);
        for i in 0..fine_steps {
            dw1[i] = sd * normal(&mut r1);
            dw2[i] = sd * normal(&mut r2);
        }
        for level in 0..levels {
            let group = 1usize << (levels - 1 - level);
            let steps = c.n_steps << level;
            let dt = c.dt / (1u64 << level) as f64;
            let mut state = c.x0;
            let mut y = moment(state)?;
            for s in 0..steps {
                let (w1, w2) = (
                    dw1[s * group..(s + 1) * group].iter().sum::<f64>(),
                    dw2[s * group..(s + 1) * group].iter().sum::<f64>(),
                );
                let h = (c.drift)(state.0, state.1);
                let g = (c.diffusion)(state.0, state.1);
                let k = moment_sde_coefficients(spec.family, spec.order, state, h, g)?;
                y += k.a * dt + k.b * w1 + k.c * w2;
                state = coupled_step(c, state, dt, w1, w2);
                let gap = libm::fabs(y - moment(state)?);
                max[level] = max[level].max(gap);
                if s + 1 == steps {
                    sq[level].add(gap * gap);
                }
            }
        }
    }
    let out: Vec<DiscrepancyLevel> = (0..levels)
        .map(|l| DiscrepancyLevel {
            dt: c.dt / (1u64 << l) as f64,
            rms: libm::sqrt(sq[l].value() / n_paths as f64),
            max: max[l],
        })
        .collect();
    let orders = out.windows(2).map(|w| libm::log2(w[0].rms / w[1].rms)).collect();
    let lx: Vec<f64> = out.iter().map(|l| libm::log(l.dt)).collect();
    let ly: Vec<f64> = out.iter().map(|l| libm::log(l.rms)).collect();
    let fitted_order = crate::numeric::weighted_line(&lx, &ly, &vec![1.0; levels]).map_or(f64::NAN, |(_, b)| b);
    Ok(MomentEvolutionReport { levels: out, orders, fitted_order })
}

/// Inputs of the synthetic snapshot generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub phi_pattern: DailyPattern,
    pub theta_pattern: DailyPattern,
    /// OU rate of `φ*` per second.
    pub k: f64,
    pub sigma: f64,
    pub n_entities: usize,
    pub days: usize,
    /// Calendar day (days since the epoch) of the first trading day.
    pub first_day: i64,
    pub calendar: TradingCalendar,
    pub seed: u64,
    /// Abort when the share of rejected OU steps exceeds this.
    pub max_rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub series: SnapshotSeries,
    /// True parameters per trading snapshot.
    pub phi: Vec<f64>,
    pub phi_star: Vec<f64>,
    pub theta: Vec<f64>,
    pub rejections: usize,
    pub proposals: usize,
}

/// Snapshots of inverse-Gamma values with `φ = φ̄(t_d) + φ*` and `θ = θ̄(t_d)`.
///
/// `φ*` starts from its stationary law and moves by the exact OU transition
/// over the elapsed time between trading slots, overnight included. A step
/// that would make `φ ≤ 0` is redrawn and counted. `φ*` uses substream 0;
/// snapshot `i` draws its values from substream `1 + i`.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.calendar.validate()?;
    if spec.n_entities == 0 || spec.days == 0 {
        return Err(Error::InsufficientData("generator needs entities and days".into()));
    }
    let ou = OuAnalytic { k: spec.k, sigma: spec.sigma, phi_f: 0.0, phi0: 0.0, t0: 0.0 };
    if !(spec.k > 0.0) {
        return Err(Error::NotMeanReverting(spec.k));
    }
    let mut rng = substream(spec.seed, 0);
    let slots = spec.calendar.session_length_intervals;
    let mut times = Vec::new();
    for d in 0..spec.days as i64 {
        for j in 0..slots {
            times.push(spec.calendar.slot_time(spec.first_day + d, j));
        }
    }
    let limit = spec.max_rejection_rate;
    let (mut rejections, mut proposals) = (0usize, 0usize);
    let mut phi_star = Vec::with_capacity(times.len());
    let mut phi = Vec::with_capacity(times.len());
    let mut theta = Vec::with_capacity(times.len());
    let mut snapshots = Vec::with_capacity(times.len());
    let stationary_sd = libm::sqrt(ou.stationary_variance());
    let mut x = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let td = intraday_minute(t, &spec.calendar) as f64;
        let base = spec.phi_pattern.value(td);
        loop {
            let xi = normal(&mut rng);
            let candidate = if i == 0 { stationary_sd * xi } else { ou.exact_step(x, (t - times[i - 1]) as f64, xi) };
            proposals += 1;
            if base + candidate > 0.0 {
                x = candidate;
                break;
            }
            rejections += 1;
            let rate = rejections as f64 / proposals as f64;
            if proposals >= 100 && rate > limit || rejections > 1000 + 100 * times.len() {
                return Err(Error::GeneratorAbort { rate, limit });
            }
        }
        let params = ModelParams::new(ModelFamily::InverseGamma, base + x, spec.theta_pattern.value(td))?;
        let sampler = params.sampler();
        let mut r = substream(spec.seed, 1 + i as u64);
        snapshots.push((0..spec.n_entities).map(|_| sampler.sample(&mut r)).collect());
        phi_star.push(x);
        phi.push(params.phi());
        theta.push(params.theta());
    }
    let rate = rejections as f64 / proposals as f64;
    if rate > limit {
        return Err(Error::GeneratorAbort { rate, limit });
    }
    let mask = vec![Mask::Trading; times.len()];
    Ok(SyntheticDataset {
        series: SnapshotSeries::new(times, snapshots, mask)?,
        phi,
        phi_star,
        theta,
        rejections,
        proposals,
    })
}
