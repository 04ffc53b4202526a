//! Weighted `|log-ratio|` divergences between model and empirical densities,
//! per-snapshot rankings and their aggregates.
//!
//! `D^(F)(P‖Q) = Σ_i |ln(P_i / Q_i)| F_i Δs_i`, with `P` the model density,
//! `Q` the empirical density and `F = P` (center) or `F = 1/P` (tail).
//! With `F = P` this resembles the Kullback-Leibler divergence but is not
//! equal to it: the absolute value keeps every term nonnegative.

use alloc::vec::Vec;

use crate::dist::ModelFamily;
use crate::ecdf::{EmpiricalCDF, FitResult};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Densities are floored here before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Weight {
    /// `F = P`
    Center,
    /// `F = 1/P`
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TailRestriction {
    None,
    /// Only support points strictly above the empirical median.
    AboveMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightScheme {
    pub weight: Weight,
    pub restriction: TailRestriction,
}

impl WeightScheme {
    pub const CENTER: WeightScheme = WeightScheme { weight: Weight::Center, restriction: TailRestriction::None };
    pub const TAIL: WeightScheme = WeightScheme { weight: Weight::Tail, restriction: TailRestriction::AboveMedian };

    pub fn name(&self) -> &'static str {
        match (self.weight, self.restriction) {
            (Weight::Center, TailRestriction::None) => "center",
            (Weight::Center, TailRestriction::AboveMedian) => "center_above_median",
            (Weight::Tail, TailRestriction::AboveMedian) => "tail",
            (Weight::Tail, TailRestriction::None) => "tail_full",
        }
    }
}

/// A divergence value and how many densities hit the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Divergence {
    pub value: f64,
    pub floored: usize,
}

/// `Σ |ln(P/Q)| F Δs` over the given points.
pub fn weighted_divergence(model: &[f64], empirical: &[f64], widths: &[f64], weight: Weight) -> Result<Divergence> {
    if model.len() != empirical.len() {
        return Err(Error::LengthMismatch { left: model.len(), right: empirical.len() });
    }
    if model.len() != widths.len() {
        return Err(Error::LengthMismatch { left: model.len(), right: widths.len() });
    }
    let mut floored = 0;
    let mut floor = |v: f64| {
        if v < DENSITY_FLOOR || v.is_nan() {
            floored += 1;
            DENSITY_FLOOR
        } else {
            v
        }
    };
    let mut total = CompensatedSum::new();
    let mut weights = CompensatedSum::new();
    for ((&p, &q), &w) in model.iter().zip(empirical).zip(widths) {
        let (p, q) = (floor(p), floor(q));
        let f = match weight {
            Weight::Center => p,
            Weight::Tail => 1.0 / p,
        };
        weights.add(f * w);
        total.add(libm::fabs(libm::log(p / q)) * f * w);
    }
    if !(weights.value() > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    Ok(Divergence { value: total.value(), floored })
}

/// Divergence of a fitted model from the ECDF under `scheme`.
pub fn model_divergence(fit: &FitResult, ecdf: &EmpiricalCDF, scheme: WeightScheme) -> Result<Divergence> {
    let median = ecdf.median();
    let keep: Vec<usize> = (0..ecdf.len())
        .filter(|&i| match scheme.restriction {
            TailRestriction::None => true,
            TailRestriction::AboveMedian => ecdf.support()[i] > median,
        })
        .collect();
    let density = ecdf.density();
    let model: Vec<f64> = keep.iter().map(|&i| fit.params.pdf(ecdf.support()[i])).collect::<Result<_>>()?;
    let empirical: Vec<f64> = keep.iter().map(|&i| density[i]).collect();
    let widths: Vec<f64> = keep.iter().map(|&i| ecdf.widths()[i]).collect();
    weighted_divergence(&model, &empirical, &widths, scheme.weight)
}

/// One family's score in one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankEntry {
    pub family: ModelFamily,
    /// `+∞` for a fit that failed or did not converge.
    pub divergence: f64,
    /// 1 is best.
    pub rank: u8,
    pub floored: usize,
}

/// Ranks for four divergences: ascending value, ties in family order.
pub fn assign_ranks(divergences: [f64; 4]) -> [u8; 4] {
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| key(divergences[a]).total_cmp(&key(divergences[b])).then(a.cmp(&b)));
    let mut ranks = [0u8; 4];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as u8 + 1;
    }
    ranks
}

/// Score and rank the four fits of one snapshot. `fits` is in family order.
pub fn rank_snapshot(fits: &[Result<FitResult>; 4], ecdf: &EmpiricalCDF, scheme: WeightScheme) -> [RankEntry; 4] {
    let mut div = [f64::INFINITY; 4];
    let mut floored = [0usize; 4];
    for (i, fit) in fits.iter().enumerate() {
        if let Ok(fit) = fit {
            if fit.converged {
                if let Ok(d) = model_divergence(fit, ecdf, scheme) {
                    if d.value.is_finite() {
                        div[i] = d.value;
                        floored[i] = d.floored;
                    }
                }
            }
        }
    }
    let ranks = assign_ranks(div);
    core::array::from_fn(|i| RankEntry {
        family: ModelFamily::ALL[i],
        divergence: div[i],
        rank: ranks[i],
        floored: floored[i],
    })
}

/// Per-family summary over all ranked snapshots.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FamilySummary {
    pub family: ModelFamily,
    /// Mean and population std of the finite divergences.
    pub mean: f64,
    pub std: f64,
    pub finite: usize,
    pub non_finite: usize,
    /// `rank_histogram[r]` counts snapshots where the family had rank `r + 1`.
    pub rank_histogram: [usize; 4],
}

pub fn aggregate_ranks(table: &[[RankEntry; 4]]) -> Result<[FamilySummary; 4]> {
    if table.is_empty() {
        return Err(Error::InsufficientData("no ranked snapshots".into()));
    }
    Ok(core::array::from_fn(|f| {
        let values: Vec<f64> = table.iter().map(|row| row[f].divergence).filter(|v| v.is_finite()).collect();
        let (mean, std) = if values.is_empty() { (f64::NAN, f64::NAN) } else { crate::numeric::mean_std(&values) };
        let mut rank_histogram = [0usize; 4];
        for row in table {
            rank_histogram[(row[f].rank - 1) as usize] += 1;
        }
        FamilySummary {
            family: ModelFamily::ALL[f],
            mean,
            std,
            finite: values.len(),
            non_finite: table.len() - values.len(),
            rank_histogram,
        }
    }))
}
