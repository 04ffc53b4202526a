//! File formats: record CSV, the per-day snapshot store, parameter CSV and
//! the JSON/CSV envelopes that stamp every output with its configuration.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use parevo_core::ecdf::{FitResult, ParamTimeSeries};
use parevo_core::ingest::{day_of, Mask, ObservationRecord, SnapshotSeries, SECONDS_PER_DAY};
use parevo_core::{ModelFamily, ModelParams};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::config::PipelineConfig;
use crate::error::CliError;

/// Configuration and its hash, stamped on every output.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub config: PipelineConfig,
    pub hash: String,
}

impl RunMeta {
    pub fn new(config: &PipelineConfig) -> Self {
        Self { hash: config.hash(), config: config.clone() }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    config_hash: &'a str,
    seed: u64,
    config: &'a PipelineConfig,
    #[serde(flatten)]
    body: &'a T,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Pretty JSON with the config envelope; non-finite floats become `null`.
pub fn write_json<T: Serialize>(path: &Path, meta: &RunMeta, body: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    let env = Envelope { config_hash: &meta.hash, seed: meta.config.seed, config: &meta.config, body };
    serde_json::to_writer_pretty(&mut w, &env).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(write_err(path))
}

/// CSV writer whose first lines are `#` comments carrying hash, seed and config.
pub fn csv_writer(path: &Path, meta: &RunMeta) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut w = create(path)?;
    let cfg = serde_json::to_string(&meta.config).expect("config is always representable");
    write!(w, "# config_hash={}\n# seed={}\n# config={cfg}\n", meta.hash, meta.config.seed).map_err(write_err(path))?;
    Ok(csv::Writer::from_writer(w))
}

pub fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + Copy + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

/// Shortest round-trip float text.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub source: String,
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<ObservationRecord>,
    pub errors: Vec<RowError>,
}

enum Layout {
    Value,
    VolumePrice,
}

/// Parse `timestamp,entity_id,value` or `timestamp,entity_id,volume,price` rows.
///
/// A bad row is reported with its line number and skipped; a bad header fails the load.
pub fn load_records<R: Read>(source: &str, reader: R) -> Result<LoadedRecords, CliError> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Input(format!("{source}: {e}")))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let layout = match names.as_slice() {
        ["timestamp", "entity_id", "value"] => Layout::Value,
        ["timestamp", "entity_id", "volume", "price"] => Layout::VolumePrice,
        _ => return Err(CliError::Input(format!(
            "{source}: expected header timestamp,entity_id,value or timestamp,entity_id,volume,price, found {names:?}"
        ))),
    };
    let mut out = LoadedRecords::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                out.errors.push(RowError { source: source.into(), line, message: e.to_string() });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line());
        match parse_row(&row, &layout) {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(RowError { source: source.into(), line, message }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, layout: &Layout) -> Result<ObservationRecord, String> {
    let field = |i: usize| row.get(i).ok_or_else(|| format!("missing field {}", i + 1));
    let num = |i: usize| -> Result<f64, String> {
        let s = field(i)?;
        s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
    };
    let timestamp = field(0)?.parse::<i64>().map_err(|_| format!("bad timestamp {:?}", row.get(0).unwrap_or("")))?;
    let entity_id = field(1)?.to_string();
    if entity_id.is_empty() {
        return Err("empty entity_id".into());
    }
    let value = match layout {
        Layout::Value => num(2)?,
        Layout::VolumePrice => num(2)? * num(3)?,
    };
    if !(value >= 0.0 && value.is_finite()) {
        return Err(format!("value must be finite and nonnegative, got {value}"));
    }
    Ok(ObservationRecord { timestamp, entity_id, value })
}

pub fn load_records_file(path: &Path) -> Result<LoadedRecords, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    load_records(&path.display().to_string(), std::io::BufReader::new(f))
}

pub fn write_records(path: &Path, meta: &RunMeta, records: &[ObservationRecord]) -> Result<(), CliError> {
    let mut w = csv_writer(path, meta)?;
    let err = csv_err(path);
    w.write_record(["timestamp", "entity_id", "value"]).map_err(err)?;
    for r in records {
        w.write_record([r.timestamp.to_string(), r.entity_id.clone(), float(r.value)]).map_err(err)?;
    }
    w.flush().map_err(write_err(path))
}

/// ISO date of a day number (days since the epoch).
pub fn iso_date(day: i64) -> String {
    chrono::DateTime::from_timestamp(day * SECONDS_PER_DAY, 0)
        .map(|d| d.date_naive().to_string())
        .unwrap_or_else(|| format!("day{day}"))
}

#[derive(Serialize)]
struct DayDocument<'a> {
    date: String,
    times: &'a [i64],
    snapshots: Vec<Vec<Box<RawValue>>>,
    mask: &'a [Mask],
}

#[derive(Deserialize)]
struct DayInput {
    times: Vec<i64>,
    snapshots: Vec<Vec<f64>>,
    mask: Vec<Mask>,
}

/// One JSON document per calendar day, floats written with 17 significant digits.
pub fn write_snapshot_store(dir: &Path, meta: &RunMeta, series: &SnapshotSeries) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for day in series.days() {
        let part = series.day(day);
        let snapshots = part
            .snapshots()
            .iter()
            .map(|s| s.iter().map(|v| RawValue::from_string(format!("{v:.16e}")).expect("valid number")).collect())
            .collect();
        let doc = DayDocument { date: iso_date(day), times: part.times(), snapshots, mask: part.mask() };
        let path = dir.join(format!("{}.json", iso_date(day)));
        write_json(&path, meta, &doc)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_snapshot_store(dir: &Path) -> Result<SnapshotSeries, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no snapshot documents", dir.display())));
    }
    let mut parts = Vec::with_capacity(files.len());
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: DayInput =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        parts.push(
            SnapshotSeries::new(doc.times, doc.snapshots, doc.mask)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        );
    }
    SnapshotSeries::concat(parts).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

/// One row of the parameter CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub time: i64,
    pub family: ModelFamily,
    pub phi: Option<f64>,
    pub theta: Option<f64>,
    pub sse: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

pub fn param_rows(params: &ParamTimeSeries) -> Vec<ParamRow> {
    let mut rows = Vec::with_capacity(4 * params.times.len());
    for (&time, fits) in params.times.iter().zip(&params.fits) {
        for (family, fit) in ModelFamily::ALL.iter().zip(fits) {
            rows.push(match fit {
                Ok(f) => ParamRow {
                    time,
                    family: *family,
                    phi: Some(f.params.phi()),
                    theta: Some(f.params.theta()),
                    sse: Some(f.sse),
                    converged: f.converged,
                    iterations: f.iterations,
                    error: None,
                },
                Err(e) => ParamRow {
                    time,
                    family: *family,
                    phi: None,
                    theta: None,
                    sse: None,
                    converged: false,
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    rows
}

pub fn write_params(path: &Path, meta: &RunMeta, params: &ParamTimeSeries) -> Result<(), CliError> {
    let mut w = csv_writer(path, meta)?;
    let err = csv_err(path);
    w.write_record(["time", "family", "phi", "theta", "sse", "converged", "iterations", "error"]).map_err(err)?;
    let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
    for r in param_rows(params) {
        w.write_record([
            r.time.to_string(),
            r.family.name().to_string(),
            opt(r.phi),
            opt(r.theta),
            opt(r.sse),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.error.unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(write_err(path))
}

pub fn read_params(path: &Path) -> Result<Vec<ParamRow>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv_reader(std::io::BufReader::new(f));
    let mut rows = Vec::new();
    for (i, r) in rdr.deserialize::<ParamRow>().enumerate() {
        rows.push(r.map_err(|e| CliError::Input(format!("{} row {}: {e}", path.display(), i + 1)))?);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no parameter rows", path.display())));
    }
    Ok(rows)
}

/// Rebuild per-snapshot fits from parameter rows.
pub fn params_from_rows(rows: &[ParamRow]) -> Result<ParamTimeSeries, CliError> {
    let mut by_time: BTreeMap<i64, [Option<&ParamRow>; 4]> = BTreeMap::new();
    for r in rows {
        let slot = &mut by_time.entry(r.time).or_default()[r.family.index()];
        if slot.replace(r).is_some() {
            return Err(CliError::Input(format!("duplicate row for time {} family {}", r.time, r.family)));
        }
    }
    let mut out = ParamTimeSeries { times: Vec::new(), fits: Vec::new() };
    for (time, cells) in by_time {
        let fits = core::array::from_fn(|i| {
            let missing = || parevo_core::Error::InsufficientData(format!("no {} row at {time}", ModelFamily::ALL[i]));
            let r = cells[i].ok_or_else(missing)?;
            match (r.phi, r.theta, r.sse) {
                (Some(phi), Some(theta), Some(sse)) => Ok(FitResult {
                    params: ModelParams::new(r.family, phi, theta)?,
                    sse,
                    converged: r.converged,
                    iterations: r.iterations,
                }),
                _ => Err(parevo_core::Error::InsufficientData(r.error.clone().unwrap_or_default())),
            }
        });
        out.times.push(time);
        out.fits.push(fits);
    }
    Ok(out)
}

/// Calendar days present in a list of times, in order.
pub fn distinct_days(times: &[i64]) -> Vec<i64> {
    let mut d: Vec<i64> = times.iter().map(|&t| day_of(t)).collect();
    d.dedup();
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_layouts() {
        let a = load_records("a", "timestamp,entity_id,value\n1,x,2.5\n2,y,0\n3,z,1e3\n".as_bytes()).unwrap();
        assert_eq!(a.records.len(), 3);
        assert!(a.errors.is_empty());
        let b = load_records("b", "timestamp,entity_id,volume,price\n60,acme,100,2.5\n".as_bytes()).unwrap();
        assert_eq!(b.records[0].value, 250.0);
    }

    #[test]
    fn bad_rows_carry_line_numbers() {
        let text = "# comment\ntimestamp,entity_id,value\n1,x,1\n2,y,-1\n3,z,abc\n4,w\n";
        let r = load_records("f.csv", text.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 1);
        let lines: Vec<u64> = r.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![4, 5, 6]);
        assert!(r.errors[0].message.contains("nonnegative"));
    }

    #[test]
    fn unknown_header_is_fatal() {
        assert!(matches!(load_records("f", "t,id,v\n1,a,2\n".as_bytes()), Err(CliError::Input(_))));
    }

    #[test]
    fn iso_dates() {
        assert_eq!(iso_date(0), "1970-01-01");
        assert_eq!(iso_date(19_000), "2022-01-08");
    }
}
