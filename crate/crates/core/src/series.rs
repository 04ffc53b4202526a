//! Regularly sampled series that may contain gaps.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Values on a regular grid of spacing `dt` seconds.
///
/// Each value carries an integer grid tick and a segment id (a trading day,
/// typically). A lag-`m` pair `(i, i + m)` is valid only when both samples
/// lie in the same segment and are exactly `m` ticks apart, so increments
/// never bridge an overnight gap or a missing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    dt: f64,
    values: Vec<f64>,
    ticks: Vec<i64>,
    segments: Vec<i64>,
}

impl SampledSeries {
    /// One uninterrupted segment.
    pub fn contiguous(values: Vec<f64>, dt: f64) -> Result<Self> {
        let n = values.len() as i64;
        Self::from_parts(values, (0..n).collect(), alloc::vec![0; n as usize], dt)
    }

    /// Values with explicit ticks and segment ids; ticks must increase strictly.
    pub fn from_parts(values: Vec<f64>, ticks: Vec<i64>, segments: Vec<i64>, dt: f64) -> Result<Self> {
        if values.len() != ticks.len() {
            return Err(Error::LengthMismatch { left: values.len(), right: ticks.len() });
        }
        if values.len() != segments.len() {
            return Err(Error::LengthMismatch { left: values.len(), right: segments.len() });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(alloc::format!("dt must be positive, got {dt}")));
        }
        if ticks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("ticks must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("series values must be finite".into()));
        }
        Ok(Self { dt, values, ticks, segments })
    }

    /// Equal-length segments laid end to end; pairs never cross a segment boundary.
    pub fn from_segments(segments: &[Vec<f64>], dt: f64) -> Result<Self> {
        let mut values = Vec::new();
        let mut ticks = Vec::new();
        let mut ids = Vec::new();
        let mut tick = 0i64;
        for (s, seg) in segments.iter().enumerate() {
            for &v in seg {
                values.push(v);
                ticks.push(tick);
                ids.push(s as i64);
                tick += 1;
            }
            // leave a hole so segments are never adjacent on the grid
            tick += 1;
        }
        Self::from_parts(values, ticks, ids, dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    pub fn segments(&self) -> &[i64] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether `(i, i + lag)` is a valid lag pair.
    #[inline]
    pub fn pair_valid(&self, i: usize, lag: usize) -> bool {
        let j = i + lag;
        j < self.values.len() && self.segments[i] == self.segments[j] && self.ticks[j] - self.ticks[i] == lag as i64
    }

    /// Iterator over `(x_i, x_{i+lag})` for every valid pair.
    pub fn lag_pairs(&self, lag: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.values.len().saturating_sub(lag))
            .filter(move |&i| self.pair_valid(i, lag))
            .map(move |i| (self.values[i], self.values[i + lag]))
    }

    /// Same sampling structure, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_parts(values, self.ticks.clone(), self.segments.clone(), self.dt)
    }
}
