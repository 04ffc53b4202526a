//! Markov-property diagnostics for a fluctuation series.
//!
//! For a lag of `m` steps we form triples `x₁ = x(t)`, `x₂ = x(t − m)`,
//! `x₃ = x(t − 2m)`. If the process is Markov at that scale, the law of
//! `x₁` given `x₂` does not depend on `x₃`. Within each `x₂` bin the `x₁`
//! values whose `x₃` falls in one bin are compared against the rest with a
//! Wilcoxon rank-sum test. Under the null the normalized statistic `z` is
//! standard normal, so `E|z| = √(2/π)`; the reported ratio is the mean `|z|`
//! over all tested bin pairs divided by that value.

use alloc::vec;
use alloc::vec::Vec;

use crate::numeric::mean_std;
use crate::series::SampledSeries;
use crate::{Error, Result};

/// `E|z|` for a standard normal `z`.
pub const T0: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarkovOptions {
    /// Bins over `mean ± 3 std`.
    pub bins: usize,
    /// Minimum size of both rank-sum samples.
    pub min_count: usize,
    /// Acceptance band for the ratio.
    pub band: (f64, f64),
    /// Half-width of the `x₃ ≈ 0` slice, in units of the series std.
    pub slice_half_width: f64,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        Self { bins: 40, min_count: 50, band: (0.9, 1.1), slice_half_width: 0.1 }
    }
}

/// Result of a Wilcoxon rank-sum comparison of two samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankSum {
    /// Sum of the midranks of the first sample in the pooled sample.
    pub w: f64,
    /// `n_a (N + 1) / 2`
    pub expected: f64,
    /// Null variance with tie correction.
    pub variance: f64,
    /// `(W − E) / √V`, or 0 when the variance vanishes.
    pub z: f64,
    /// `W / E`
    pub ratio: f64,
}

/// Wilcoxon rank-sum statistic of `a` against `b` (midranks for ties).
pub fn rank_sum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("rank-sum needs two nonempty samples".into()));
    }
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = pooled.len() as f64;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut w = 0.0;
    let mut ties = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = 0.5 * ((i + 1) as f64 + j as f64);
        let t = (j - i) as f64;
        ties += t * t * t - t;
        w += mid * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let expected = na * (n + 1.0) / 2.0;
    let variance = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)).max(1.0));
    let z = if variance > 0.0 { (w - expected) / libm::sqrt(variance) } else { 0.0 };
    Ok(RankSum { w, expected, variance, z, ratio: w / expected })
}

/// Equal-width binning over `mean ± 3 std`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Binning {
    pub lo: f64,
    pub width: f64,
    pub bins: usize,
}

impl Binning {
    pub fn around(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::InsufficientData("nothing to bin".into()));
        }
        let (m, s) = mean_std(values);
        let half = if s > 0.0 { 3.0 * s } else { 0.5 };
        Ok(Self { lo: m - half, width: 2.0 * half / bins as f64, bins })
    }

    #[inline]
    pub fn index(&self, x: f64) -> Option<usize> {
        let u = (x - self.lo) / self.width;
        (u >= 0.0 && u < self.bins as f64).then_some(u as usize)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|i| self.lo + i as f64 * self.width).collect()
    }
}

/// Triples `(x(t), x(t − a), x(t − b))` that lie on the grid inside one segment.
fn triples(series: &SampledSeries, a: usize, b: usize, stride: usize) -> Vec<(f64, f64, f64)> {
    let x = series.values();
    let mut out = Vec::new();
    let mut t = b;
    while t < x.len() {
        let i3 = t - b;
        if series.pair_valid(i3, b) && series.pair_valid(t - a, a) {
            out.push((x[t], x[t - a], x[i3]));
        }
        t += stride.max(1);
    }
    out
}

/// Histogram estimates of `p(x₁ | x₂)` and `p(x₁ | x₂, x₃ ≈ 0)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionalDensityPair {
    /// Lags in steps.
    pub tau1: usize,
    pub tau2: usize,
    pub tau3: usize,
    pub binning: Binning,
    pub slice_half_width: f64,
    /// `single[j][i]`: density of `x₁` in bin `i` given `x₂` in bin `j`;
    /// `None` where the conditioning bin holds fewer than `min_count` samples.
    pub single: Vec<Option<Vec<f64>>>,
    pub double: Vec<Option<Vec<f64>>>,
    pub single_counts: Vec<usize>,
    pub double_counts: Vec<usize>,
}

fn conditional_histogram(
    pairs: impl Iterator<Item = (f64, f64)>,
    bin: &Binning,
    min_count: usize,
) -> (Vec<Option<Vec<f64>>>, Vec<usize>) {
    let mut hist = vec![vec![0usize; bin.bins]; bin.bins];
    for (x1, x2) in pairs {
        if let (Some(i), Some(j)) = (bin.index(x1), bin.index(x2)) {
            hist[j][i] += 1;
        }
    }
    let counts: Vec<usize> = hist.iter().map(|h| h.iter().sum()).collect();
    let dens = hist
        .into_iter()
        .zip(&counts)
        .map(|(h, &n)| (n >= min_count.max(1)).then(|| h.iter().map(|&c| c as f64 / (n as f64 * bin.width)).collect()))
        .collect();
    (dens, counts)
}

/// Conditional densities at lags `tau1 < tau2 < tau3` (in steps).
///
/// `x₁ = x(t − τ₁)`, `x₂ = x(t − τ₂)`, `x₃ = x(t − τ₃)`; the slice keeps
/// triples with `|x₃| ≤ slice_half_width · std`.
pub fn conditional_densities(
    series: &SampledSeries,
    tau1: usize,
    tau2: usize,
    tau3: usize,
    opts: &MarkovOptions,
) -> Result<ConditionalDensityPair> {
    if !(tau1 < tau2 && tau2 < tau3) {
        return Err(Error::Domain("need tau1 < tau2 < tau3".into()));
    }
    if opts.bins < 10 {
        return Err(Error::Domain("need at least 10 bins".into()));
    }
    let binning = Binning::around(series.values(), opts.bins)?;
    let (_, sd) = mean_std(series.values());
    let hw = opts.slice_half_width * sd;
    let tr: Vec<(f64, f64, f64)> = triples(series, tau2 - tau1, tau3 - tau1, 1);
    let (single, single_counts) = conditional_histogram(tr.iter().map(|t| (t.0, t.1)), &binning, opts.min_count);
    let (double, double_counts) = conditional_histogram(
        tr.iter().filter(|t| libm::fabs(t.2) <= hw).map(|t| (t.0, t.1)),
        &binning,
        opts.min_count,
    );
    if double.iter().all(Option::is_none) {
        return Err(Error::InsufficientData("empty x3 = 0 slice".into()));
    }
    Ok(ConditionalDensityPair {
        tau1,
        tau2,
        tau3,
        binning,
        slice_half_width: hw,
        single,
        double,
        single_counts,
        double_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WilcoxonRatio {
    /// Mean `|z|` over tested bin pairs divided by `√(2/π)`.
    pub ratio: f64,
    /// Number of `(x₂, x₃)` bin pairs tested.
    pub tests: usize,
    pub triples: usize,
}

/// Pooled Wilcoxon ratio `t/t₀` at a lag of `lag` steps.
pub fn wilcoxon_ratio(series: &SampledSeries, lag: usize, opts: &MarkovOptions) -> Result<WilcoxonRatio> {
    if lag == 0 {
        return Err(Error::Domain("lag must be positive".into()));
    }
    let binning = Binning::around(series.values(), opts.bins)?;
    // stride = lag keeps consecutive triples from sharing points
    let tr = triples(series, lag, 2 * lag, lag);
    let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); opts.bins];
    for &(x1, x2, x3) in &tr {
        if let (Some(j), Some(k)) = (binning.index(x2), binning.index(x3)) {
            groups[j].push((k, x1));
        }
    }
    let mut sum_abs = 0.0;
    let mut tests = 0usize;
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for group in &groups {
        if group.len() < 2 * opts.min_count {
            continue;
        }
        for k in 0..opts.bins {
            inside.clear();
            outside.clear();
            for &(kk, x1) in group {
                if kk == k {
                    inside.push(x1);
                } else {
                    outside.push(x1);
                }
            }
            if inside.len() < opts.min_count || outside.len() < opts.min_count {
                continue;
            }
            sum_abs += libm::fabs(rank_sum(&inside, &outside)?.z);
            tests += 1;
        }
    }
    if tests == 0 {
        return Err(Error::InsufficientData(alloc::format!("no populated conditioning bins at lag {lag}")));
    }
    Ok(WilcoxonRatio { ratio: sum_abs / tests as f64 / T0, tests, triples: tr.len() })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MarkovScan {
    /// Lags in steps.
    pub lags: Vec<usize>,
    /// `None` where the ratio could not be computed.
    pub ratios: Vec<Option<f64>>,
    pub band: (f64, f64),
    /// Smallest lag from which every ratio lies in the band; `None` if unresolved.
    pub markov_length: Option<usize>,
}

impl MarkovScan {
    pub fn in_band(&self, r: Option<f64>) -> bool {
        matches!(r, Some(r) if r >= self.band.0 && r <= self.band.1)
    }
}

/// Evaluate the ratio at each lag and locate the Markov length.
pub fn scan_markov_length(series: &SampledSeries, lags: &[usize], opts: &MarkovOptions) -> Result<MarkovScan> {
    if lags.len() < 3 {
        return Err(Error::InsufficientData("need at least 3 lags".into()));
    }
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let ratios: Vec<Option<f64>> =
        lags.iter().map(|&m| wilcoxon_ratio(series, m, opts).ok().map(|w| w.ratio)).collect();
    let mut scan = MarkovScan { lags, ratios, band: opts.band, markov_length: None };
    let mut start = None;
    for i in (0..scan.lags.len()).rev() {
        if scan.in_band(scan.ratios[i]) {
            start = Some(i);
        } else {
            break;
        }
    }
    scan.markov_length = start.map(|i| scan.lags[i]);
    Ok(scan)
}
