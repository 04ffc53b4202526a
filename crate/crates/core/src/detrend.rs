//! Daily-pattern plus fluctuation decomposition of a parameter series.
//!
//! A value observed on trading day `d` in intraday slot `j` is split into the
//! mean of slot `j` over the trading days `d − w/2 ..= d + w/2` (truncated at
//! the ends of the series) and the remaining fluctuation. A polynomial in the
//! intraday minute summarizes the pattern.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{polyder, polyfit, polyval};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Position of an observation: trading-day ordinal and intraday slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlotKey {
    pub day: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Parameter {
    Phi,
    Theta,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Phi => "phi",
            Parameter::Theta => "theta",
        }
    }

    /// Default polynomial degree: cubic for φ, quadratic for θ.
    pub fn default_degree(self) -> usize {
        match self {
            Parameter::Phi => 3,
            Parameter::Theta => 2,
        }
    }
}

/// Polynomial daily pattern `Σ c_i x^i` with `x = t_d / unit_minutes`.
///
/// `t_d` is the intraday minute. The default unit is one sampling interval,
/// so `x` counts slots since the open; the pattern is zero outside the session.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DailyPattern {
    pub parameter: Parameter,
    /// Lowest order first.
    pub coeffs: Vec<f64>,
    pub unit_minutes: f64,
    pub session_minutes: f64,
    /// RMS residual of the fit that produced the coefficients (0 if given).
    pub residual_rms: f64,
}

impl DailyPattern {
    pub fn new(parameter: Parameter, coeffs: Vec<f64>, unit_minutes: f64, session_minutes: f64) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("pattern coefficients must be finite and nonempty".into()));
        }
        if !(unit_minutes > 0.0) || !(session_minutes > 0.0) {
            return Err(Error::Domain("pattern units must be positive".into()));
        }
        Ok(Self { parameter, coeffs, unit_minutes, session_minutes, residual_rms: 0.0 })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn in_session(&self, td: f64) -> bool {
        (0.0..self.session_minutes).contains(&td)
    }

    /// Pattern value at intraday minute `td`.
    pub fn value(&self, td: f64) -> f64 {
        if self.in_session(td) {
            polyval(&self.coeffs, td / self.unit_minutes)
        } else {
            0.0
        }
    }

    /// Time derivative of the pattern in units per second.
    pub fn derivative_per_second(&self, td: f64) -> f64 {
        if self.in_session(td) {
            polyval(&polyder(&self.coeffs), td / self.unit_minutes) / (self.unit_minutes * 60.0)
        } else {
            0.0
        }
    }
}

/// Least-squares polynomial through `(t_d, value)` pairs.
pub fn fit_daily_polynomial(
    parameter: Parameter,
    td: &[f64],
    values: &[f64],
    degree: usize,
    unit_minutes: f64,
    session_minutes: f64,
) -> Result<DailyPattern> {
    let mut distinct = td.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(Error::RankDeficient);
    }
    let x: Vec<f64> = td.iter().map(|t| t / unit_minutes).collect();
    let coeffs = polyfit(&x, values, degree)?;
    let mut pattern = DailyPattern::new(parameter, coeffs, unit_minutes, session_minutes)?;
    let mut sq = CompensatedSum::new();
    for (&xi, &yi) in x.iter().zip(values) {
        let r = yi - polyval(&pattern.coeffs, xi);
        sq.add(r * r);
    }
    pattern.residual_rms = libm::sqrt(sq.value() / values.len() as f64);
    Ok(pattern)
}

/// Moving slot-aligned mean over `window_days` trading days centred on each point.
pub fn moving_daily_pattern(keys: &[SlotKey], values: &[f64], window_days: usize) -> Result<Vec<f64>> {
    if keys.len() != values.len() {
        return Err(Error::LengthMismatch { left: keys.len(), right: values.len() });
    }
    let mut days: Vec<usize> = keys.iter().map(|k| k.day).collect();
    days.sort_unstable();
    days.dedup();
    if days.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!("{} trading day(s), need at least 2", days.len())));
    }
    let half = window_days / 2;
    let mut by_slot: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (k, &v) in keys.iter().zip(values) {
        by_slot.entry(k.slot).or_default().push((k.day, v));
    }
    for col in by_slot.values_mut() {
        col.sort_by_key(|e| e.0);
    }
    let mut out = vec![0.0; values.len()];
    for (i, k) in keys.iter().enumerate() {
        let col = &by_slot[&k.slot];
        let lo = k.day.saturating_sub(half);
        let hi = k.day + half;
        let start = col.partition_point(|e| e.0 < lo);
        // deviations from an anchor keep a constant window exactly constant
        let anchor = col[start].1;
        let mut acc = CompensatedSum::new();
        let mut n = 0usize;
        for &(d, v) in &col[start..] {
            if d > hi {
                break;
            }
            acc.add(v - anchor);
            n += 1;
        }
        out[i] = anchor + acc.value() / n as f64;
    }
    Ok(out)
}

/// Split `raw` into `pattern + fluctuation` with bitwise-exact reconstruction.
fn exact_split(raw: f64, pattern: f64) -> (f64, f64) {
    let fluct = raw - pattern;
    let mut p = raw - fluct;
    for _ in 0..8 {
        let back = p + fluct;
        if back == raw {
            return (p, fluct);
        }
        p = if back < raw { p.next_up() } else { p.next_down() };
    }
    (raw, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DailyDecomposition {
    pub window_days: usize,
    /// Per-observation pattern, stored so that `pattern + fluctuation == raw` exactly.
    pub pattern: Vec<f64>,
    pub fluctuations: Vec<f64>,
    /// Mean of the raw series per slot over all days.
    pub slot_means: Vec<(usize, f64)>,
    /// Polynomial fitted to the slot means.
    pub polynomial: DailyPattern,
}

/// Moving-window decomposition plus a polynomial fit of the all-days slot means.
///
/// Slot `j` sits at intraday minute `j · interval_minutes`.
pub fn decompose(
    parameter: Parameter,
    keys: &[SlotKey],
    values: &[f64],
    window_days: usize,
    degree: usize,
    interval_minutes: f64,
    session_minutes: f64,
) -> Result<DailyDecomposition> {
    let moving = moving_daily_pattern(keys, values, window_days)?;
    let (pattern, fluctuations): (Vec<f64>, Vec<f64>) =
        values.iter().zip(&moving).map(|(&r, &p)| exact_split(r, p)).unzip();

    let mut sums: BTreeMap<usize, (CompensatedSum, usize)> = BTreeMap::new();
    for (k, &v) in keys.iter().zip(values) {
        let e = sums.entry(k.slot).or_insert((CompensatedSum::new(), 0));
        e.0.add(v);
        e.1 += 1;
    }
    let slot_means: Vec<(usize, f64)> = sums.into_iter().map(|(s, (acc, n))| (s, acc.value() / n as f64)).collect();
    let td: Vec<f64> = slot_means.iter().map(|(s, _)| *s as f64 * interval_minutes).collect();
    let ys: Vec<f64> = slot_means.iter().map(|(_, v)| *v).collect();
    let polynomial = fit_daily_polynomial(parameter, &td, &ys, degree, interval_minutes, session_minutes)?;
    Ok(DailyDecomposition { window_days, pattern, fluctuations, slot_means, polynomial })
}
