use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parevo::formats::{read_params, read_snapshot_store, write_snapshot_store, RunMeta};
use parevo::PipelineConfig;
use parevo_core::ingest::{Mask, SnapshotSeries};
use parevo_core::ModelFamily;
use tempfile::TempDir;

const SMALL: &str =
    "sim_entities = 40\nsim_days = 2\nensemble_paths = 200\nevolution_paths = 20\nevolution_levels = 3\n";

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("cfg.toml");
    let out = dir.join("out");
    fs::write(&path, format!("out = {:?}\n{extra}", out.display().to_string())).unwrap();
    path
}

fn parevo(config: &Path, command: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parevo")).args(["--config", config.to_str().unwrap(), command]).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A day at 09:00 plus `slot` ten-minute intervals, in epoch seconds.
fn stamp(day: i64, slot: i64) -> i64 {
    day * 86_400 + 540 * 60 + 600 * slot
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let cfg = write_config(dir.path(), &format!("input = [{:?}]\n", missing.display().to_string()));
    let o = parevo(&cfg, "fit");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
}

#[test]
fn unreadable_params_exit_2() {
    let dir = TempDir::new().unwrap();
    let params = dir.path().join("params.csv");
    let cfg = write_config(dir.path(), &format!("params = {:?}\n", params.display().to_string()));
    fs::write(&params, "").unwrap();
    assert_eq!(parevo(&cfg, "langevin").status.code(), Some(2));
    fs::write(&params, "1,2,3\n4,5,6\n").unwrap();
    assert_eq!(parevo(&cfg, "langevin").status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "weight_scheme = \"sideways\"\n");
    assert_eq!(parevo(&cfg, "fit").status.code(), Some(2));
    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    assert_eq!(parevo(&cfg, "fit").status.code(), Some(2));
}

#[test]
fn records_outside_the_session_exit_3() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("night.csv");
    let mut text = String::from("timestamp,entity_id,value\n");
    for e in 0..20 {
        text += &format!("{},e{e},{}\n", 19_000 * 86_400 + 3 * 3600, 1.0 + e as f64);
    }
    fs::write(&input, text).unwrap();
    let cfg = write_config(dir.path(), &format!("input = [{:?}]\n", input.display().to_string()));
    let o = parevo(&cfg, "fit");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("ingest"));
}

#[test]
fn undersized_day_is_dropped_and_bad_rows_are_reported() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    let mut text = String::from("timestamp,entity_id,volume,price\n");
    for day in [19_000i64, 19_001] {
        for slot in 0..39 {
            let n = if day == 19_001 && slot == 7 { 3 } else { 30 };
            for e in 0..n {
                text += &format!("{},e{e},{},{}\n", stamp(day, slot), 1 + e, 1.5 + 0.1 * slot as f64);
            }
        }
    }
    text += "oops,e1,1,1\n";
    fs::write(&input, text).unwrap();
    let cfg = write_config(dir.path(), &format!("input = [{:?}]\n", input.display().to_string()));
    let o = parevo(&cfg, "fit");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/fit_diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["dropped_dates"], serde_json::json!(["2022-01-09"]));
    assert_eq!(diag["snapshots"], 39);
    let errors = diag["row_errors"].as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["line"], 2 + 2 * 39 * 30 - 27);
}

#[test]
fn simulate_then_fit_covers_every_snapshot() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = parevo(&cfg, "simulate");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = parevo(&cfg, "fit");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_params(&dir.path().join("out/params.csv")).unwrap();
    for family in ModelFamily::ALL {
        assert_eq!(rows.iter().filter(|r| r.family == family).count(), 78, "{family}");
    }
    let o = parevo(&cfg, "rank");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["rank_tail.json", "rank_center.json", "ranks.csv", "rank_table.csv"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }

    // Two days cannot fill a 20-day detrending window.
    let o = parevo(&cfg, "langevin");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("detrend"), "{}", stderr(&o));
}

#[test]
fn runaway_generator_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}phi_coeffs = [-0.01]\n"));
    let o = parevo(&cfg, "simulate");
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn snapshot_store_round_trip_is_exact() {
    let dir = TempDir::new().unwrap();
    let times: Vec<i64> = (0..4).map(|s| stamp(19_000, s)).chain([stamp(19_001, 0)]).collect();
    let snaps = vec![
        vec![0.1, 1.0 / 3.0, 2.0f64.sqrt()],
        vec![],
        vec![5e-300, 1.7e300, std::f64::consts::PI],
        vec![1.0; 7],
        vec![123_456.789_012_345_67],
    ];
    let mask = vec![Mask::Trading, Mask::Closed, Mask::Trading, Mask::Trading, Mask::Trading];
    let series = SnapshotSeries::new(times, snaps, mask).unwrap();
    let meta = RunMeta::new(&PipelineConfig::default());
    let files = write_snapshot_store(dir.path(), &meta, &series).unwrap();
    assert_eq!(files.len(), 2);
    let back = read_snapshot_store(dir.path()).unwrap();
    assert_eq!(back.times(), series.times());
    assert_eq!(back.mask(), series.mask());
    for (a, b) in back.snapshots().iter().zip(series.snapshots()) {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}
