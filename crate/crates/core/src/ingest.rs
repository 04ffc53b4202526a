//! Trading calendar, grid bucketing and cross-sectional snapshot assembly.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::detrend::SlotKey;
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One observation of the volume-price `s` of one entity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservationRecord {
    /// Epoch seconds, UTC (or exchange-local, as long as it is consistent with the calendar).
    pub timestamp: i64,
    pub entity_id: String,
    pub value: f64,
}

/// Session layout in exchange-local minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TradingCalendar {
    pub session_open_minute: i64,
    pub session_length_intervals: u32,
    pub interval_minutes: u32,
}

impl Default for TradingCalendar {
    fn default() -> Self {
        Self { session_open_minute: 540, session_length_intervals: 39, interval_minutes: 10 }
    }
}

impl TradingCalendar {
    pub fn validate(&self) -> Result<()> {
        let session = self.session_minutes();
        if self.interval_minutes == 0
            || self.session_length_intervals == 0
            || !(0..1440).contains(&self.session_open_minute)
            || session > 1440 - self.session_open_minute
        {
            return Err(Error::Domain(alloc::format!("invalid trading calendar {self:?}")));
        }
        Ok(())
    }

    pub fn session_minutes(&self) -> i64 {
        self.session_length_intervals as i64 * self.interval_minutes as i64
    }

    /// Grid spacing in seconds.
    pub fn interval_seconds(&self) -> i64 {
        self.interval_minutes as i64 * 60
    }

    /// Floors a timestamp to the grid.
    pub fn floor(&self, t: i64) -> i64 {
        let dt = self.interval_seconds();
        t - t.rem_euclid(dt)
    }

    /// Intraday slot index, if `t` falls inside the session.
    pub fn slot(&self, t: i64) -> Option<u32> {
        let td = intraday_minute(t, self);
        (0..self.session_minutes()).contains(&td).then(|| (td / self.interval_minutes as i64) as u32)
    }

    pub fn is_trading(&self, t: i64) -> bool {
        self.slot(t).is_some()
    }

    /// Timestamp of slot `slot` on calendar day `day` (days since the epoch).
    pub fn slot_time(&self, day: i64, slot: u32) -> i64 {
        day * SECONDS_PER_DAY + self.session_open_minute * 60 + slot as i64 * self.interval_seconds()
    }
}

/// Calendar day of a timestamp (days since the epoch).
pub fn day_of(t: i64) -> i64 {
    t.div_euclid(SECONDS_PER_DAY)
}

/// Intraday minute `t_d = (minute of day) − session_open_minute`.
pub fn intraday_minute(t: i64, cal: &TradingCalendar) -> i64 {
    t.div_euclid(60).rem_euclid(1440) - cal.session_open_minute
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mask {
    Trading,
    Closed,
}

/// Cross-sectional snapshots on the sampling grid.
///
/// Trading snapshots hold the positive values of every entity, sorted
/// ascending; closed snapshots are empty.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SnapshotSeries {
    times: Vec<i64>,
    snapshots: Vec<Vec<f64>>,
    mask: Vec<Mask>,
}

impl SnapshotSeries {
    /// Builds a series, sorting each snapshot and checking the mask invariants.
    pub fn new(times: Vec<i64>, mut snapshots: Vec<Vec<f64>>, mask: Vec<Mask>) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(Error::LengthMismatch { left: times.len(), right: snapshots.len() });
        }
        if times.len() != mask.len() {
            return Err(Error::LengthMismatch { left: times.len(), right: mask.len() });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("snapshot times must be strictly increasing".into()));
        }
        for (i, (snap, m)) in snapshots.iter_mut().zip(&mask).enumerate() {
            match m {
                Mask::Trading if snap.is_empty() => {
                    return Err(Error::Domain(alloc::format!("trading snapshot {i} is empty")))
                }
                Mask::Closed if !snap.is_empty() => {
                    return Err(Error::Domain(alloc::format!("closed snapshot {i} holds values")))
                }
                _ => {}
            }
            if snap.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Domain(alloc::format!("snapshot {i} holds a non-positive value")));
            }
            snap.sort_by(f64::total_cmp);
        }
        Ok(Self { times, snapshots, mask })
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Vec<f64>] {
        &self.snapshots
    }

    pub fn mask(&self) -> &[Mask] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(time, snapshot)` for every trading time.
    pub fn trading(&self) -> impl Iterator<Item = (i64, &[f64])> + '_ {
        self.times
            .iter()
            .zip(&self.snapshots)
            .zip(&self.mask)
            .filter(|(_, m)| **m == Mask::Trading)
            .map(|((&t, s), _)| (t, s.as_slice()))
    }

    pub fn trading_count(&self) -> usize {
        self.mask.iter().filter(|m| **m == Mask::Trading).count()
    }

    /// Distinct calendar days, ascending.
    pub fn days(&self) -> Vec<i64> {
        let mut days: Vec<i64> = self.times.iter().map(|&t| day_of(t)).collect();
        days.dedup();
        days
    }

    /// Restrict to the given calendar day.
    pub fn day(&self, day: i64) -> SnapshotSeries {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| day_of(self.times[i]) == day).collect();
        SnapshotSeries {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            snapshots: keep.iter().map(|&i| self.snapshots[i].clone()).collect(),
            mask: keep.iter().map(|&i| self.mask[i]).collect(),
        }
    }

    /// Concatenate day-sized pieces back into one series.
    pub fn concat(parts: Vec<SnapshotSeries>) -> Result<SnapshotSeries> {
        let mut times = Vec::new();
        let mut snapshots = Vec::new();
        let mut mask = Vec::new();
        for p in parts {
            times.extend(p.times);
            snapshots.extend(p.snapshots);
            mask.extend(p.mask);
        }
        SnapshotSeries::new(times, snapshots, mask)
    }

    /// Records that reassemble into this series.
    ///
    /// Entities are anonymous after assembly, so trading values get synthetic
    /// ids; each closed time is represented by one zero-valued placeholder.
    pub fn flatten(&self) -> Vec<ObservationRecord> {
        let mut out = Vec::new();
        for ((&t, snap), m) in self.times.iter().zip(&self.snapshots).zip(&self.mask) {
            match m {
                Mask::Trading => out.extend(snap.iter().enumerate().map(|(i, &v)| ObservationRecord {
                    timestamp: t,
                    entity_id: alloc::format!("e{i:06}"),
                    value: v,
                })),
                Mask::Closed => {
                    out.push(ObservationRecord { timestamp: t, entity_id: "_closed".to_string(), value: 0.0 })
                }
            }
        }
        out
    }
}

/// Record accounting for one assembly run; `kept + masked + dropped == total`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IngestReport {
    pub total: usize,
    pub kept: usize,
    pub masked: usize,
    pub dropped: usize,
    /// Calendar days discarded because a session bucket was undersized.
    pub dropped_days: Vec<i64>,
}

/// Bucket records onto the grid, mask the closed period and drop bad days.
///
/// Several records of one entity in the same bucket are summed. Records with
/// value 0 or outside the session count as masked; a day is dropped whole if
/// any populated session bucket has fewer than `min_entities` entities.
pub fn assemble_snapshots(
    records: &[ObservationRecord],
    cal: &TradingCalendar,
    min_entities: usize,
) -> Result<(SnapshotSeries, IngestReport)> {
    cal.validate()?;
    if records.is_empty() {
        return Err(Error::InsufficientData("no records".into()));
    }
    let mut report = IngestReport { total: records.len(), ..Default::default() };
    let mut closed: BTreeMap<i64, ()> = BTreeMap::new();
    let mut buckets: BTreeMap<i64, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in records {
        if !(r.value >= 0.0 && r.value.is_finite()) {
            return Err(Error::Domain(alloc::format!("invalid value {} for {}", r.value, r.entity_id)));
        }
        let t = cal.floor(r.timestamp);
        if !cal.is_trading(t) {
            closed.insert(t, ());
            report.masked += 1;
        } else if r.value == 0.0 {
            report.masked += 1;
        } else {
            buckets.entry(t).or_default().entry(r.entity_id.as_str()).or_default().push(r.value);
        }
    }

    let mut bad_days: BTreeMap<i64, ()> = BTreeMap::new();
    for (&t, entities) in &buckets {
        if entities.len() < min_entities {
            bad_days.insert(day_of(t), ());
        }
    }

    let mut rows: BTreeMap<i64, (Mask, Vec<f64>)> = BTreeMap::new();
    for &t in closed.keys() {
        rows.insert(t, (Mask::Closed, Vec::new()));
    }
    for (t, entities) in buckets {
        let n_records: usize = entities.values().map(Vec::len).sum();
        if bad_days.contains_key(&day_of(t)) {
            report.dropped += n_records;
            continue;
        }
        report.kept += n_records;
        let values = entities
            .into_values()
            .map(|mut vs| {
                // sort so the per-entity total does not depend on record order
                vs.sort_by(f64::total_cmp);
                let mut acc = CompensatedSum::new();
                acc.extend(vs);
                acc.value()
            })
            .collect();
        rows.insert(t, (Mask::Trading, values));
    }
    report.dropped_days = bad_days.into_keys().collect();

    if !rows.values().any(|(m, _)| *m == Mask::Trading) {
        return Err(Error::InsufficientData("no trading snapshots".into()));
    }
    let mut times = Vec::with_capacity(rows.len());
    let mut snapshots = Vec::with_capacity(rows.len());
    let mut mask = Vec::with_capacity(rows.len());
    for (t, (m, v)) in rows {
        times.push(t);
        mask.push(m);
        snapshots.push(v);
    }
    Ok((SnapshotSeries::new(times, snapshots, mask)?, report))
}

/// `(trading-day ordinal, slot)` for session timestamps, in the order given.
///
/// Day ordinals count distinct calendar days in `times`, so weekends and
/// holidays do not open holes. Times outside the session are rejected.
pub fn slot_keys(times: &[i64], cal: &TradingCalendar) -> Result<Vec<SlotKey>> {
    let mut days: Vec<i64> = times.iter().map(|&t| day_of(t)).collect();
    days.sort_unstable();
    days.dedup();
    times
        .iter()
        .map(|&t| {
            let slot = cal.slot(t).ok_or_else(|| Error::Domain(alloc::format!("time {t} is outside the session")))?;
            let day = days.binary_search(&day_of(t)).unwrap_or_default();
            Ok(SlotKey { day, slot: slot as usize })
        })
        .collect()
}
