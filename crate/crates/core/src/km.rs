//! Kramers-Moyal estimation of drift and diffusion, Ornstein-Uhlenbeck
//! extraction and autocorrelation regimes.
//!
//! Conditional moments `M_k(x, τ) = ⟨(X_{t+τ} − X_t)^k⟩_{X_t = x}` are
//! accumulated per bin and lag. Drift and diffusion follow from their slopes
//! in `τ` over `[τ_l, w·τ_l]`, `D₁ = dM₁/dτ` and `D₂ = dM₂/dτ / 2`.
//! For an OU process these finite-τ slopes are biased; the exact transition
//! moments give the corrected `k` and `σ²` reported next to the raw values.

use alloc::vec;
use alloc::vec::Vec;

use crate::detrend::DailyPattern;
use crate::markov::Binning;
use crate::numeric::{mean, weighted_line, CompensatedSum};
use crate::series::SampledSeries;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KmOptions {
    pub bins: usize,
    pub min_count: usize,
    /// Slopes use lags in `[τ_l, window_factor · τ_l]`.
    pub window_factor: f64,
}

impl Default for KmOptions {
    fn default() -> Self {
        Self { bins: 20, min_count: 100, window_factor: 3.0 }
    }
}

/// Per-bin, per-lag increment statistics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionalMoments {
    pub binning: Binning,
    pub dt: f64,
    /// Lags in steps.
    pub lags: Vec<usize>,
    pub min_count: usize,
    /// `counts[b][l]`: increments starting in bin `b` at lag `lags[l]`.
    pub counts: Vec<Vec<usize>>,
    pub m1: Vec<Vec<f64>>,
    pub m2: Vec<Vec<f64>>,
    pub m1_err: Vec<Vec<f64>>,
    pub m2_err: Vec<Vec<f64>>,
    /// Mean and mean square of the starting values per bin (lag-independent within sampling).
    pub start_mean: Vec<f64>,
    pub start_mean_sq: Vec<f64>,
    /// Valid lag pairs and pairs rejected for crossing a gap, per lag.
    pub used: Vec<usize>,
    pub excluded: Vec<usize>,
}

impl ConditionalMoments {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.binning.bins).map(|b| self.binning.center(b)).collect()
    }

    /// Whether bin `b` has at least `min_count` increments at every lag.
    pub fn populated(&self, b: usize) -> bool {
        self.counts[b].iter().all(|&c| c >= self.min_count)
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    n: usize,
    s1: CompensatedSum,
    s2: CompensatedSum,
    s3: CompensatedSum,
    s4: CompensatedSum,
}

/// Accumulate `M₁`, `M₂` with standard errors; increments crossing gaps are skipped.
pub fn conditional_moments(series: &SampledSeries, lags: &[usize], opts: &KmOptions) -> Result<ConditionalMoments> {
    if lags.len() < 2 || lags.contains(&0) {
        return Err(Error::InsufficientData("need at least 2 positive lags".into()));
    }
    let binning = Binning::around(series.values(), opts.bins)?;
    let x = series.values();
    let nb = opts.bins;
    let mut start_sum = vec![CompensatedSum::new(); nb];
    let mut start_sq = vec![CompensatedSum::new(); nb];
    let mut start_n = vec![0usize; nb];
    for &v in x {
        if let Some(b) = binning.index(v) {
            start_sum[b].add(v);
            start_sq[b].add(v * v);
            start_n[b] += 1;
        }
    }
    let mut accs = vec![vec![Acc::default(); lags.len()]; nb];
    let mut used = vec![0usize; lags.len()];
    let mut excluded = vec![0usize; lags.len()];
    for (l, &lag) in lags.iter().enumerate() {
        let total = x.len().saturating_sub(lag);
        for i in 0..total {
            if !series.pair_valid(i, lag) {
                excluded[l] += 1;
                continue;
            }
            used[l] += 1;
            if let Some(b) = binning.index(x[i]) {
                let d = x[i + lag] - x[i];
                let a = &mut accs[b][l];
                a.n += 1;
                a.s1.add(d);
                a.s2.add(d * d);
                a.s3.add(d * d * d);
                a.s4.add(d * d * d * d);
            }
        }
        assert_eq!(used[l] + excluded[l], total);
    }
    let stat =
        |f: &dyn Fn(&Acc) -> f64| -> Vec<Vec<f64>> { accs.iter().map(|row| row.iter().map(f).collect()).collect() };
    let m1 = stat(&|a| if a.n > 0 { a.s1.value() / a.n as f64 } else { f64::NAN });
    let m2 = stat(&|a| if a.n > 0 { a.s2.value() / a.n as f64 } else { f64::NAN });
    let m1_err = stat(&|a| {
        let n = a.n as f64;
        let m = a.s1.value() / n;
        libm::sqrt((a.s2.value() / n - m * m).max(0.0) / n)
    });
    let m2_err = stat(&|a| {
        let n = a.n as f64;
        let m = a.s2.value() / n;
        libm::sqrt((a.s4.value() / n - m * m).max(0.0) / n)
    });
    Ok(ConditionalMoments {
        binning,
        dt: series.dt(),
        lags: lags.to_vec(),
        min_count: opts.min_count,
        counts: accs.iter().map(|row| row.iter().map(|a| a.n).collect()).collect(),
        m1,
        m2,
        m1_err,
        m2_err,
        start_mean: (0..nb).map(|b| start_sum[b].value() / start_n[b] as f64).collect(),
        start_mean_sq: (0..nb).map(|b| start_sq[b].value() / start_n[b] as f64).collect(),
        used,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KmEstimate {
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    /// Per-bin estimates; `NaN` for bins excluded from the regression.
    pub d1: Vec<f64>,
    pub d1_err: Vec<f64>,
    pub d2: Vec<f64>,
    pub d2_err: Vec<f64>,
    /// `−slope` of the count-weighted line `D₁ = a − k x`.
    pub k_raw: f64,
    pub intercept: f64,
    /// `k` after removing the finite-lag bias; `None` if it cannot be inverted.
    pub k_corrected: Option<f64>,
    /// Count-weighted mean of `D₂`.
    pub sigma2_raw: f64,
    /// `σ²` from the exact OU second moment at the corrected `k`.
    pub sigma2_corrected: Option<f64>,
    /// Markov length in seconds.
    pub markov_length: f64,
    /// Lags (steps) entering the slopes.
    pub lags_used: Vec<usize>,
}

impl KmEstimate {
    /// Corrected values where available, raw otherwise.
    pub fn k(&self) -> f64 {
        self.k_corrected.unwrap_or(self.k_raw)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2_corrected.unwrap_or(self.sigma2_raw)
    }
}

/// Invert `g(k) = Σ τ (1 − e^{−kτ}) / Σ τ² = target` by bisection.
fn invert_lag_bias(taus: &[f64], target: f64) -> Option<f64> {
    let s2: f64 = taus.iter().map(|t| t * t).sum();
    let g = |k: f64| taus.iter().map(|&t| t * -libm::expm1(-k * t)).sum::<f64>() / s2;
    let sup: f64 = taus.iter().sum::<f64>() / s2;
    if !(target > 0.0) || target >= sup {
        return None;
    }
    let (mut lo, mut hi) = (0.0, target);
    while g(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Drift and diffusion from the conditional moments at Markov length `tau_l` (steps).
pub fn drift_diffusion(cm: &ConditionalMoments, tau_l: usize, window_factor: f64) -> Result<KmEstimate> {
    let hi = tau_l as f64 * window_factor;
    let li: Vec<usize> = (0..cm.lags.len()).filter(|&l| cm.lags[l] >= tau_l && cm.lags[l] as f64 <= hi).collect();
    if li.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!("{} lag(s) in [τ_l, {window_factor}τ_l]", li.len())));
    }
    let taus: Vec<f64> = li.iter().map(|&l| cm.lags[l] as f64 * cm.dt).collect();
    let s2: f64 = taus.iter().map(|t| t * t).sum();
    let nb = cm.binning.bins;
    let usable: Vec<bool> = (0..nb).map(|b| li.iter().all(|&l| cm.counts[b][l] >= cm.min_count)).collect();
    if usable.iter().filter(|u| **u).count() < 3 {
        return Err(Error::InsufficientData("fewer than 3 populated bins".into()));
    }
    let slope = |v: &Vec<f64>| -> f64 { li.iter().zip(&taus).map(|(&l, t)| t * v[l]).sum::<f64>() / s2 };
    let slope_err =
        |v: &Vec<f64>| -> f64 { libm::sqrt(li.iter().zip(&taus).map(|(&l, t)| t * t * v[l] * v[l]).sum::<f64>()) / s2 };
    let mut d1 = vec![f64::NAN; nb];
    let mut d1_err = vec![f64::NAN; nb];
    let mut d2 = vec![f64::NAN; nb];
    let mut d2_err = vec![f64::NAN; nb];
    let counts: Vec<usize> = (0..nb).map(|b| li.iter().map(|&l| cm.counts[b][l]).min().unwrap_or(0)).collect();
    for b in (0..nb).filter(|&b| usable[b]) {
        d1[b] = slope(&cm.m1[b]);
        d1_err[b] = slope_err(&cm.m1_err[b]);
        d2[b] = 0.5 * slope(&cm.m2[b]);
        d2_err[b] = 0.5 * slope_err(&cm.m2_err[b]);
    }
    let idx: Vec<usize> = (0..nb).filter(|&b| usable[b]).collect();
    let xs: Vec<f64> = idx.iter().map(|&b| cm.start_mean[b]).collect();
    let ys: Vec<f64> = idx.iter().map(|&b| d1[b]).collect();
    let ws: Vec<f64> = idx.iter().map(|&b| counts[b] as f64).collect();
    let (intercept, slope_d1) = weighted_line(&xs, &ys, &ws).ok_or(Error::RankDeficient)?;
    let k_raw = -slope_d1;
    let wsum: f64 = ws.iter().sum();
    let sigma2_raw = idx.iter().zip(&ws).map(|(&b, w)| w * d2[b]).sum::<f64>() / wsum;

    let k_corrected = invert_lag_bias(&taus, k_raw);
    // M₂ = v(1 − e^{−2kτ}) + ⟨(x − x₀)²⟩(1 − e^{−kτ})² for OU started at x
    let sigma2_corrected = k_corrected.and_then(|k| {
        let x0 = intercept / k_raw;
        let mut num = CompensatedSum::new();
        let mut den = CompensatedSum::new();
        for (&b, w) in idx.iter().zip(&ws) {
            let dev2 = cm.start_mean_sq[b] - 2.0 * x0 * cm.start_mean[b] + x0 * x0;
            for (&l, &t) in li.iter().zip(&taus) {
                let decay = -libm::expm1(-k * t);
                let g = -libm::expm1(-2.0 * k * t);
                num.add(w * g * (cm.m2[b][l] - dev2 * decay * decay));
                den.add(w * g * g);
            }
        }
        let v = num.value() / den.value();
        (v > 0.0).then_some(2.0 * k * v)
    });
    Ok(KmEstimate {
        centers: cm.centers(),
        counts,
        d1,
        d1_err,
        d2,
        d2_err,
        k_raw,
        intercept,
        k_corrected,
        sigma2_raw,
        sigma2_corrected,
        markov_length: tau_l as f64 * cm.dt,
        lags_used: li.iter().map(|&l| cm.lags[l]).collect(),
    })
}

/// Ornstein-Uhlenbeck description `dφ = −k(φ − φ_f) dt + σ dW`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OuParams {
    /// Per second.
    pub k: f64,
    pub sigma2: f64,
    pub sigma: f64,
    /// `σ² / (2k)`
    pub stationary_variance: f64,
    /// `1/k` in seconds.
    pub response_time: f64,
    /// `(t_d, φ_f(t_d))` at every session slot.
    pub phi_f: Vec<(f64, f64)>,
}

/// Fixed point `φ_f = φ̄ + (1/k) dφ̄/dt` at intraday minute `td`.
pub fn fixed_point(pattern: &DailyPattern, k: f64, td: f64) -> f64 {
    pattern.value(td) + pattern.derivative_per_second(td) / k
}

pub fn ou_params(k: f64, sigma2: f64, pattern: &DailyPattern, interval_minutes: f64) -> Result<OuParams> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::NotMeanReverting(k));
    }
    let slots = libm::ceil(pattern.session_minutes / interval_minutes) as usize;
    let phi_f = (0..slots)
        .map(|j| {
            let td = j as f64 * interval_minutes;
            (td, fixed_point(pattern, k, td))
        })
        .collect();
    Ok(OuParams {
        k,
        sigma2,
        sigma: libm::sqrt(sigma2),
        stationary_variance: sigma2 / (2.0 * k),
        response_time: 1.0 / k,
        phi_f,
    })
}

/// OU parameters from a KM estimate (bias-corrected values where available).
pub fn ou_extract(km: &KmEstimate, pattern: &DailyPattern, interval_minutes: f64) -> Result<OuParams> {
    ou_params(km.k(), km.sigma2(), pattern, interval_minutes)
}

/// One exponential regime `A e^{−τ/T}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Regime {
    pub amplitude: f64,
    /// Seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AutocorrRegimes {
    /// Lags in steps, starting at 0.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Single exponential through `ρ(0) = 1`.
    pub single: Option<Regime>,
    /// Short and long regimes, when two clearly separated ones fit better.
    pub short: Option<Regime>,
    pub long: Option<Regime>,
    /// Lag (steps) separating the regimes.
    pub breakpoint: Option<usize>,
    /// `1/k` marker in seconds, filled in by the caller.
    pub inverse_k: Option<f64>,
    pub reliable: bool,
}

/// Biased autocorrelation using only pairs within one segment.
pub fn autocorrelation(series: &SampledSeries, max_lag: usize) -> Vec<f64> {
    let x = series.values();
    let m = mean(x);
    let n = x.len() as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut c0 = CompensatedSum::new();
    c0.extend(dev.iter().map(|d| d * d));
    let c0 = c0.value() / n;
    (0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                return 1.0;
            }
            let mut acc = CompensatedSum::new();
            for i in 0..x.len().saturating_sub(lag) {
                if series.pair_valid(i, lag) {
                    acc.add(dev[i] * dev[i + lag]);
                }
            }
            if c0 > 0.0 {
                acc.value() / n / c0
            } else {
                0.0
            }
        })
        .collect()
}

/// Autocorrelation and its exponential regimes up to `max_lag` steps.
///
/// Lags are used while `ρ` stays above `e⁻³`. The single regime is a
/// log-linear fit through the origin; the two-regime model
/// `(1 − A) e^{−τ/T_s} + A e^{−τ/T_l}` is fitted for every breakpoint by first
/// fitting the long regime beyond it and then the residual before it, and
/// the breakpoint with the smallest squared error wins. It is reported only
/// if it halves the single-regime error and `T_l > 3 T_s`.
pub fn autocorrelation_regimes(series: &SampledSeries, max_lag: usize) -> Result<AutocorrRegimes> {
    if series.len() < 4 * max_lag || max_lag < 2 {
        return Err(Error::InsufficientData(alloc::format!("series of {} for max lag {max_lag}", series.len())));
    }
    let values = autocorrelation(series, max_lag);
    let dt = series.dt();
    let cutoff = libm::exp(-3.0);
    let usable = values.iter().skip(1).take_while(|&&r| r > cutoff).count();
    let mut out = AutocorrRegimes {
        lags: (0..=max_lag).collect(),
        values: values.clone(),
        single: None,
        short: None,
        long: None,
        breakpoint: None,
        inverse_k: None,
        reliable: false,
    };
    if usable < 2 {
        return Ok(out);
    }
    let lags: Vec<f64> = (1..=usable).map(|m| m as f64 * dt).collect();
    let rho: Vec<f64> = values[1..=usable].to_vec();
    let logs: Vec<f64> = rho.iter().map(|r| libm::log(*r)).collect();
    let inv = -crate::numeric::slope_through_origin(&lags, &logs);
    if !(inv > 0.0) {
        return Ok(out);
    }
    let single = Regime { amplitude: 1.0, time: 1.0 / inv };
    let sse = |f: &dyn Fn(f64) -> f64| -> f64 { lags.iter().zip(&rho).map(|(&t, &r)| (r - f(t)) * (r - f(t))).sum() };
    let sse_single = sse(&|t| libm::exp(-t / single.time));
    out.single = Some(single);
    out.reliable = usable < max_lag || values[max_lag] < 0.5;

    let mut best: Option<(f64, usize, Regime, Regime)> = None;
    for bp in 1..usable.saturating_sub(2) {
        let (tl, ll): (Vec<f64>, Vec<f64>) = (bp..usable).map(|i| (lags[i], logs[i])).unzip();
        let ones = vec![1.0; tl.len()];
        let Some((a, b)) = weighted_line(&tl, &ll, &ones) else { continue };
        if !(b < 0.0) {
            continue;
        }
        let long = Regime { amplitude: libm::exp(a), time: -1.0 / b };
        let short_amp = 1.0 - long.amplitude;
        if !(short_amp > 0.0 && long.amplitude > 0.0) {
            continue;
        }
        let (ts, ls): (Vec<f64>, Vec<f64>) = (0..bp)
            .filter_map(|i| {
                let r = rho[i] - long.amplitude * libm::exp(-lags[i] / long.time);
                (r > 0.0).then(|| (lags[i], libm::log(r / short_amp)))
            })
            .unzip();
        if ts.is_empty() {
            continue;
        }
        let s = -crate::numeric::slope_through_origin(&ts, &ls);
        if !(s > 0.0) {
            continue;
        }
        let short = Regime { amplitude: short_amp, time: 1.0 / s };
        let e = sse(&|t| short.amplitude * libm::exp(-t / short.time) + long.amplitude * libm::exp(-t / long.time));
        if best.as_ref().is_none_or(|b| e < b.0) {
            best = Some((e, bp, short, long));
        }
    }
    if let Some((e, bp, short, long)) = best {
        if e < 0.5 * sse_single && long.time > 3.0 * short.time {
            out.short = Some(short);
            out.long = Some(long);
            out.breakpoint = Some(bp);
        }
    }
    Ok(out)
}
