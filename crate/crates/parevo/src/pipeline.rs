//! Stage orchestration for the CLI subcommands.
//!
//! Each `cmd_*` function reads its inputs from files, runs the core
//! estimators and writes its reports under the configured output directory.
//! The compute steps are exposed separately so tests can run them in memory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use parevo_core::detrend::{decompose, DailyDecomposition, DailyPattern, Parameter};
use parevo_core::divergence::{aggregate_ranks, rank_snapshot, FamilySummary, RankEntry, WeightScheme};
use parevo_core::ecdf::{fit_snapshot, EmpiricalCDF, ParamTimeSeries};
use parevo_core::ingest::{assemble_snapshots, intraday_minute, slot_keys, IngestReport, SnapshotSeries};
use parevo_core::km::{
    autocorrelation_regimes, conditional_moments, drift_diffusion, ou_extract, AutocorrRegimes, KmEstimate, KmOptions,
    OuParams,
};
use parevo_core::markov::{conditional_densities, scan_markov_length, ConditionalDensityPair, MarkovOptions};
use parevo_core::sde::{
    generate_synthetic_dataset, ou_ensemble, ou_mean_var, verify_moment_evolution, CoupledLangevinSpec,
    MomentEvolutionReport, MomentEvolutionSpec, OuAnalytic, SyntheticDataset, SyntheticSpec,
};
use parevo_core::series::SampledSeries;
use parevo_core::ModelFamily;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::formats::{self, float, RowError, RunMeta};

/// Fit all four families to every trading snapshot, in parallel, in time order.
pub fn fit_series(series: &SnapshotSeries, min_sample: usize) -> ParamTimeSeries {
    let trading: Vec<(i64, &[f64])> = series.trading().collect();
    let fits = trading.par_iter().map(|(_, s)| fit_snapshot(s, min_sample)).collect();
    ParamTimeSeries { times: trading.iter().map(|(t, _)| *t).collect(), fits }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyFitCounts {
    pub converged: usize,
    pub not_converged: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub ingest: IngestReport,
    pub dropped_dates: Vec<String>,
    pub row_errors: Vec<RowError>,
    pub snapshots: usize,
    pub families: BTreeMap<&'static str, FamilyFitCounts>,
}

pub fn fit_diagnostics(report: IngestReport, row_errors: Vec<RowError>, params: &ParamTimeSeries) -> FitDiagnostics {
    let families = ModelFamily::ALL
        .iter()
        .map(|f| {
            let col = params.fits.iter().map(|fits| &fits[f.index()]);
            let converged = col.clone().filter(|r| matches!(r, Ok(x) if x.converged)).count();
            let failed = col.filter(|r| r.is_err()).count();
            (f.name(), FamilyFitCounts { converged, not_converged: params.times.len() - converged - failed, failed })
        })
        .collect();
    FitDiagnostics {
        dropped_dates: report.dropped_days.iter().map(|&d| formats::iso_date(d)).collect(),
        ingest: report,
        row_errors,
        snapshots: params.times.len(),
        families,
    }
}

pub struct FitOutcome {
    pub series: SnapshotSeries,
    pub params: ParamTimeSeries,
    pub diagnostics: FitDiagnostics,
}

/// Load records, assemble snapshots, fit, and write the snapshot store,
/// `params.csv` and `fit_diagnostics.json`.
pub fn cmd_fit(cfg: &PipelineConfig) -> Result<FitOutcome, CliError> {
    let meta = RunMeta::new(cfg);
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for path in cfg.inputs() {
        let loaded = formats::load_records_file(&path)?;
        records.extend(loaded.records);
        errors.extend(loaded.errors);
    }
    let (series, report) =
        assemble_snapshots(&records, &cfg.calendar(), cfg.min_entities).map_err(|e| CliError::stage("ingest", e))?;
    let params = fit_series(&series, cfg.min_sample);
    let diagnostics = fit_diagnostics(report, errors, &params);
    formats::write_snapshot_store(&cfg.out.join("snapshots"), &meta, &series)?;
    formats::write_params(&cfg.out.join("params.csv"), &meta, &params)?;
    formats::write_json(&cfg.out.join("fit_diagnostics.json"), &meta, &diagnostics)?;
    Ok(FitOutcome { series, params, diagnostics })
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotRank {
    pub time: i64,
    /// Per family in `ModelFamily::ALL` order; `null` when not finite.
    pub divergence: [f64; 4],
    pub rank: [u8; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub scheme: &'static str,
    pub per_family: BTreeMap<&'static str, FamilySummary>,
    pub per_snapshot: Vec<SnapshotRank>,
}

impl RankReport {
    pub fn summary(&self, family: ModelFamily) -> &FamilySummary {
        &self.per_family[family.name()]
    }
}

/// Rank the fitted families at every snapshot under `scheme`.
pub fn rank_params(
    series: &SnapshotSeries,
    params: &ParamTimeSeries,
    min_sample: usize,
    scheme: WeightScheme,
) -> Result<RankReport, CliError> {
    let by_time: BTreeMap<i64, &[f64]> = series.trading().collect();
    let rows: Vec<Result<[RankEntry; 4], CliError>> = params
        .times
        .par_iter()
        .zip(&params.fits)
        .map(|(t, fits)| {
            let sample = by_time.get(t).ok_or_else(|| CliError::Input(format!("no snapshot at time {t}")))?;
            let ecdf = EmpiricalCDF::from_sample(sample, min_sample).map_err(|e| CliError::stage("rank", e))?;
            Ok(rank_snapshot(fits, &ecdf, scheme))
        })
        .collect();
    let table = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = aggregate_ranks(&table).map_err(|e| CliError::stage("rank", e))?;
    Ok(RankReport {
        scheme: scheme.name(),
        per_family: summary.iter().map(|s| (s.family.name(), s.clone())).collect(),
        per_snapshot: params
            .times
            .iter()
            .zip(&table)
            .map(|(&time, row)| SnapshotRank { time, divergence: row.map(|e| e.divergence), rank: row.map(|e| e.rank) })
            .collect(),
    })
}

/// Both weighting schemes, configured scheme first.
pub fn cmd_rank(cfg: &PipelineConfig) -> Result<[RankReport; 2], CliError> {
    let meta = RunMeta::new(cfg);
    let rows = formats::read_params(&cfg.params_path())?;
    let params = formats::params_from_rows(&rows)?;
    let series = formats::read_snapshot_store(&cfg.out.join("snapshots"))?;
    let first = cfg.scheme()?;
    let second = if first == WeightScheme::TAIL { WeightScheme::CENTER } else { WeightScheme::TAIL };
    let reports = [first, second].map(|s| rank_params(&series, &params, cfg.min_sample, s));
    let [a, b] = reports;
    let reports = [a?, b?];
    let ranks_path = cfg.out.join("ranks.csv");
    let mut w = formats::csv_writer(&ranks_path, &meta)?;
    w.write_record(["time", "family", "scheme", "divergence", "rank"]).map_err(formats::csv_err(&ranks_path))?;
    let table_path = cfg.out.join("rank_table.csv");
    let mut t = formats::csv_writer(&table_path, &meta)?;
    t.write_record(["scheme", "family", "mean", "std", "finite", "non_finite", "rank1", "rank2", "rank3", "rank4"])
        .map_err(formats::csv_err(&table_path))?;
    for r in &reports {
        formats::write_json(&cfg.out.join(format!("rank_{}.json", r.scheme)), &meta, r)?;
        for s in &r.per_snapshot {
            for (i, f) in ModelFamily::ALL.iter().enumerate() {
                w.write_record([
                    s.time.to_string(),
                    f.name().into(),
                    r.scheme.into(),
                    float(s.divergence[i]),
                    s.rank[i].to_string(),
                ])
                .map_err(formats::csv_err(&ranks_path))?;
            }
        }
        for f in ModelFamily::ALL {
            let s = r.summary(f);
            let h = s.rank_histogram;
            t.write_record([
                r.scheme.to_string(),
                f.name().into(),
                float(s.mean),
                float(s.std),
                s.finite.to_string(),
                s.non_finite.to_string(),
                h[0].to_string(),
                h[1].to_string(),
                h[2].to_string(),
                h[3].to_string(),
            ])
            .map_err(formats::csv_err(&table_path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&ranks_path, e))?;
    t.flush().map_err(|e| CliError::io(&table_path, e))?;
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovReport {
    pub taus: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    pub band: [f64; 2],
    /// Scanned Markov length; `null` if no lag settled in the band.
    pub markov_length_minutes: Option<f64>,
    pub markov_length_used_minutes: f64,
    pub source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct KmReport {
    pub bins: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(rename = "D1")]
    pub d1: Vec<f64>,
    #[serde(rename = "D1_err")]
    pub d1_err: Vec<f64>,
    #[serde(rename = "D2")]
    pub d2: Vec<f64>,
    #[serde(rename = "D2_err")]
    pub d2_err: Vec<f64>,
    pub k_raw: f64,
    pub k_corrected: Option<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    pub sigma2_raw: f64,
    pub sigma2_corrected: Option<f64>,
    pub markov_length_used: f64,
    pub lags_used: Vec<usize>,
    pub stationary_variance: f64,
}

impl KmReport {
    fn new(km: &KmEstimate, ou: &OuParams) -> Self {
        Self {
            bins: km.centers.clone(),
            counts: km.counts.clone(),
            d1: km.d1.clone(),
            d1_err: km.d1_err.clone(),
            d2: km.d2.clone(),
            d2_err: km.d2_err.clone(),
            k_raw: km.k_raw,
            k_corrected: km.k_corrected,
            intercept: km.intercept,
            sigma2: km.sigma2(),
            sigma2_raw: km.sigma2_raw,
            sigma2_corrected: km.sigma2_corrected,
            markov_length_used: km.markov_length,
            lags_used: km.lags_used.clone(),
            stationary_variance: ou.stationary_variance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LangevinResult {
    pub times: Vec<i64>,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi_decomposition: DailyDecomposition,
    pub theta_decomposition: DailyDecomposition,
    pub markov: MarkovReport,
    pub densities: Option<ConditionalDensityPair>,
    pub km: KmEstimate,
    pub ou: OuParams,
    pub acf: AutocorrRegimes,
}

/// Detrend, scan for the Markov length, estimate drift and diffusion,
/// extract the OU description and the autocorrelation regimes.
pub fn langevin(cfg: &PipelineConfig, params: &ParamTimeSeries) -> Result<LangevinResult, CliError> {
    let cal = cfg.calendar();
    let column = params.column(cfg.family);
    let times: Vec<i64> = column.iter().map(|(t, _)| *t).collect();
    let phi: Vec<f64> = column.iter().map(|(_, p)| p.phi()).collect();
    let theta: Vec<f64> = column.iter().map(|(_, p)| p.theta()).collect();
    let days = formats::distinct_days(&times).len();
    if days < cfg.window_days.max(2) {
        return Err(CliError::Insufficient {
            stage: "detrend",
            message: format!("{days} day(s) of converged {} fits, need {}", cfg.family, cfg.window_days.max(2)),
        });
    }
    let keys = slot_keys(&times, &cal).map_err(|e| CliError::stage("detrend", e))?;
    let step = cal.interval_minutes as f64;
    let session = cal.session_minutes() as f64;
    let split = |p: Parameter, v: &[f64], deg: usize| {
        decompose(p, &keys, v, cfg.window_days, deg, step, session).map_err(|e| CliError::stage("detrend", e))
    };
    let phi_decomposition = split(Parameter::Phi, &phi, cfg.phi_degree)?;
    let theta_decomposition = split(Parameter::Theta, &theta, cfg.theta_degree)?;

    let per_day = cal.session_length_intervals as i64 + 1;
    let ticks = keys.iter().map(|k| k.day as i64 * per_day + k.slot as i64).collect();
    let segments = keys.iter().map(|k| k.day as i64).collect();
    let dt = cal.interval_seconds() as f64;
    let series = SampledSeries::from_parts(phi_decomposition.fluctuations.clone(), ticks, segments, dt)
        .map_err(|e| CliError::stage("markov", e))?;

    let to_steps = |m: u32| (m / cal.interval_minutes) as usize;
    let mopts = MarkovOptions {
        bins: cfg.markov_bins,
        min_count: cfg.markov_min_count,
        band: (cfg.band[0], cfg.band[1]),
        slice_half_width: cfg.markov_slice_width,
    };
    let lags: Vec<usize> = cfg.markov_lags_minutes.iter().map(|&m| to_steps(m)).collect();
    let scan = scan_markov_length(&series, &lags, &mopts).map_err(|e| CliError::stage("markov", e))?;
    let (tau_l, source) = match scan.markov_length {
        Some(m) => (m, "scan"),
        None => (to_steps(cfg.fallback_markov_length_minutes), "fallback"),
    };
    let markov = MarkovReport {
        taus: scan.lags.iter().map(|&m| m as f64 * step).collect(),
        ratios: scan.ratios.clone(),
        band: cfg.band,
        markov_length_minutes: scan.markov_length.map(|m| m as f64 * step),
        markov_length_used_minutes: tau_l as f64 * step,
        source,
    };
    let densities = conditional_densities(&series, 0, tau_l, 2 * tau_l, &MarkovOptions { bins: 20, ..mopts }).ok();

    let kopts = KmOptions { bins: cfg.km_bins, min_count: cfg.km_min_count, window_factor: cfg.km_window_factor };
    let max_lag = (tau_l as f64 * cfg.km_window_factor).floor() as usize;
    let km_lags: Vec<usize> = (1..=max_lag.max(2)).collect();
    let cm = conditional_moments(&series, &km_lags, &kopts).map_err(|e| CliError::stage("km", e))?;
    let km = drift_diffusion(&cm, tau_l, cfg.km_window_factor).map_err(|e| CliError::stage("km", e))?;
    let ou = ou_extract(&km, &phi_decomposition.polynomial, step).map_err(|e| CliError::stage("ou", e))?;
    let mut acf =
        autocorrelation_regimes(&series, to_steps(cfg.acf_max_lag_minutes)).map_err(|e| CliError::stage("acf", e))?;
    acf.inverse_k = Some(ou.response_time);
    Ok(LangevinResult { times, phi, theta, phi_decomposition, theta_decomposition, markov, densities, km, ou, acf })
}

#[derive(Serialize)]
struct PatternDoc<'a> {
    parameter: &'static str,
    degree: usize,
    coeffs: &'a [f64],
    unit_minutes: f64,
    residual_rms: f64,
    slot_means: &'a [(usize, f64)],
    window_days: usize,
}

fn pattern_doc(d: &DailyDecomposition) -> PatternDoc<'_> {
    let p: &DailyPattern = &d.polynomial;
    PatternDoc {
        parameter: p.parameter.name(),
        degree: p.degree(),
        coeffs: &p.coeffs,
        unit_minutes: p.unit_minutes,
        residual_rms: p.residual_rms,
        slot_means: &d.slot_means,
        window_days: d.window_days,
    }
}

#[derive(Serialize)]
struct AcfDoc<'a> {
    dt_seconds: f64,
    #[serde(flatten)]
    regimes: &'a AutocorrRegimes,
}

pub fn write_langevin(cfg: &PipelineConfig, r: &LangevinResult) -> Result<(), CliError> {
    let meta = RunMeta::new(cfg);
    let out = &cfg.out;
    let cal = cfg.calendar();
    for (name, d, raw) in [("phi", &r.phi_decomposition, &r.phi), ("theta", &r.theta_decomposition, &r.theta)] {
        formats::write_json(&out.join(format!("pattern_{name}.json")), &meta, &pattern_doc(d))?;
        let path = out.join(format!("decomposition_{name}.csv"));
        let err = formats::csv_err(&path);
        let mut w = formats::csv_writer(&path, &meta)?;
        w.write_record(["time", "raw", "pattern", "fluctuation"]).map_err(err)?;
        for i in 0..r.times.len() {
            w.write_record([r.times[i].to_string(), float(raw[i]), float(d.pattern[i]), float(d.fluctuations[i])])
                .map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    formats::write_json(&out.join("markov.json"), &meta, &r.markov)?;
    if let Some(d) = &r.densities {
        let path = out.join("densities.csv");
        let err = formats::csv_err(&path);
        let mut w = formats::csv_writer(&path, &meta)?;
        w.write_record(["tau_minutes", "x2", "x1", "single", "double"]).map_err(err)?;
        let tau = (d.tau2 as u32 * cal.interval_minutes).to_string();
        for j in 0..d.binning.bins {
            for i in 0..d.binning.bins {
                let pick = |v: &Option<Vec<f64>>| v.as_ref().map(|v| float(v[i])).unwrap_or_default();
                w.write_record([
                    tau.clone(),
                    float(d.binning.center(j)),
                    float(d.binning.center(i)),
                    pick(&d.single[j]),
                    pick(&d.double[j]),
                ])
                .map_err(err)?;
            }
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    formats::write_json(&out.join("km.json"), &meta, &KmReport::new(&r.km, &r.ou))?;
    formats::write_json(&out.join("ou.json"), &meta, &r.ou)?;
    formats::write_json(
        &out.join("acf.json"),
        &meta,
        &AcfDoc { dt_seconds: cal.interval_seconds() as f64, regimes: &r.acf },
    )?;
    let path = out.join("band.csv");
    let err = formats::csv_err(&path);
    let mut w = formats::csv_writer(&path, &meta)?;
    w.write_record(["t_d", "phi_pattern", "phi_f", "lower", "upper"]).map_err(err)?;
    let half = r.ou.stationary_variance.sqrt();
    for &(td, f) in &r.ou.phi_f {
        w.write_record([
            float(td),
            float(r.phi_decomposition.polynomial.value(td)),
            float(f),
            float(f - half),
            float(f + half),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

pub fn cmd_langevin(cfg: &PipelineConfig) -> Result<LangevinResult, CliError> {
    let rows = formats::read_params(&cfg.params_path())?;
    let params = formats::params_from_rows(&rows)?;
    let r = langevin(cfg, &params)?;
    write_langevin(cfg, &r)?;
    Ok(r)
}

pub fn synthetic_spec(cfg: &PipelineConfig) -> Result<SyntheticSpec, CliError> {
    let cal = cfg.calendar();
    let session = cal.session_minutes() as f64;
    let unit = cal.interval_minutes as f64;
    let pattern = |p, c: &[f64]| {
        DailyPattern::new(p, c.to_vec(), unit, session)
            .map_err(|e| CliError::Input(format!("{} pattern: {e}", p.name())))
    };
    Ok(SyntheticSpec {
        phi_pattern: pattern(Parameter::Phi, &cfg.phi_coeffs)?,
        theta_pattern: pattern(Parameter::Theta, &cfg.theta_coeffs)?,
        k: cfg.sim_k,
        sigma: cfg.sim_sigma,
        n_entities: cfg.sim_entities,
        days: cfg.sim_days,
        first_day: cfg.sim_first_day,
        calendar: cal,
        seed: cfg.seed,
        max_rejection_rate: cfg.max_rejection_rate,
    })
}

pub fn generate(cfg: &PipelineConfig) -> Result<SyntheticDataset, CliError> {
    generate_synthetic_dataset(&synthetic_spec(cfg)?).map_err(|e| CliError::stage("generate", e))
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    /// Elapsed time in units of `1/k`.
    pub kt: f64,
    pub time: f64,
    pub mean: f64,
    pub mean_expected: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_expected: f64,
    pub variance_se: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuCheck {
    pub process: OuAnalytic,
    pub dt: f64,
    pub paths: usize,
    pub checkpoints: Vec<Checkpoint>,
}

/// Euler-Maruyama ensemble against the closed-form OU mean and variance.
pub fn ou_check(cfg: &PipelineConfig, kts: &[f64]) -> Result<OuCheck, CliError> {
    let k = cfg.sim_k;
    let sd = cfg.sim_sigma / (2.0 * k).sqrt();
    let process = OuAnalytic { k, sigma: cfg.sim_sigma, phi_f: 0.0, phi0: 3.0 * sd, t0: 0.0 };
    let per = cfg.ensemble_steps_per_response_time.max(1) as f64;
    let dt = 1.0 / (k * per);
    let steps: Vec<usize> = kts.iter().map(|kt| (kt * per).round() as usize).collect();
    let stats = ou_ensemble(&process, dt, &steps, cfg.ensemble_paths, cfg.seed);
    let checkpoints = kts
        .iter()
        .zip(&steps)
        .zip(&stats)
        .map(|((&kt, &n), s)| {
            let time = n as f64 * dt;
            let (m, v) = ou_mean_var(&process, time).map_err(|e| CliError::stage("ou_check", e))?;
            Ok(Checkpoint {
                kt,
                time,
                mean: s.mean,
                mean_expected: m,
                mean_se: s.mean_se,
                variance: s.variance,
                variance_expected: v,
                variance_se: s.variance_se,
                within_3se: (s.mean - m).abs() <= 3.0 * s.mean_se && (s.variance - v).abs() <= 3.0 * s.variance_se,
            })
        })
        .collect::<Result<_, CliError>>()?;
    Ok(OuCheck { process, dt, paths: cfg.ensemble_paths, checkpoints })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionStudy {
    pub family: ModelFamily,
    pub order: u32,
    pub stochastic: MomentEvolutionReport,
    pub deterministic: MomentEvolutionReport,
}

/// Strong-order study of the moment SDE for a log-normal with OU parameters.
pub fn evolution_study(cfg: &PipelineConfig) -> Result<EvolutionStudy, CliError> {
    let run = |g: [[f64; 2]; 2]| {
        let spec = MomentEvolutionSpec {
            family: ModelFamily::LogNormal,
            order: 1,
            coupled: CoupledLangevinSpec {
                drift: |p: f64, t: f64| (-0.5 * p, -0.5 * (t - 0.5)),
                diffusion: move |_, _| g,
                x0: (0.3, 0.4),
                dt: 0.05,
                n_steps: 20,
                seed: cfg.seed,
            },
        };
        verify_moment_evolution(&spec, cfg.evolution_paths, cfg.evolution_levels)
            .map_err(|e| CliError::stage("evolution", e))
    };
    Ok(EvolutionStudy {
        family: ModelFamily::LogNormal,
        order: 1,
        stochastic: run([[0.3, 0.0], [0.0, 0.1]])?,
        deterministic: run([[0.0; 2]; 2])?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorReport {
    pub snapshots: usize,
    pub entities: usize,
    pub rejections: usize,
    pub proposals: usize,
    pub rejection_rate: f64,
}

pub struct SimulateOutcome {
    pub dataset: SyntheticDataset,
    pub ou_check: OuCheck,
    pub evolution: EvolutionStudy,
    pub dataset_path: PathBuf,
}

/// Synthetic dataset in the record CSV schema, its ground truth, and the
/// OU and moment-evolution validation reports.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<SimulateOutcome, CliError> {
    let meta = RunMeta::new(cfg);
    let dataset = generate(cfg)?;
    let dataset_path = cfg.out.join("dataset.csv");
    formats::write_records(&dataset_path, &meta, &dataset.series.flatten())?;
    let path = cfg.out.join("truth.csv");
    let err = formats::csv_err(&path);
    let mut w = formats::csv_writer(&path, &meta)?;
    w.write_record(["time", "t_d", "phi", "phi_star", "theta"]).map_err(err)?;
    for (i, &t) in dataset.series.times().iter().enumerate() {
        w.write_record([
            t.to_string(),
            intraday_minute(t, &cfg.calendar()).to_string(),
            float(dataset.phi[i]),
            float(dataset.phi_star[i]),
            float(dataset.theta[i]),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let generator = GeneratorReport {
        snapshots: dataset.series.trading_count(),
        entities: cfg.sim_entities,
        rejections: dataset.rejections,
        proposals: dataset.proposals,
        rejection_rate: dataset.rejections as f64 / dataset.proposals as f64,
    };
    formats::write_json(&cfg.out.join("generator.json"), &meta, &generator)?;
    let ou_check = ou_check(cfg, &[0.5, 1.0, 2.0, 5.0, 10.0])?;
    formats::write_json(&cfg.out.join("ou_check.json"), &meta, &ou_check)?;
    let evolution = evolution_study(cfg)?;
    formats::write_json(&cfg.out.join("evolution.json"), &meta, &evolution)?;
    Ok(SimulateOutcome { dataset, ou_check, evolution, dataset_path })
}

/// Collect the headline numbers of whatever stage reports exist in the output directory.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<serde_json::Value, CliError> {
    let meta = RunMeta::new(cfg);
    let read = |name: &str| -> Result<Option<serde_json::Value>, CliError> {
        let path = cfg.out.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map(Some).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    };
    let pick = |doc: &Option<serde_json::Value>, keys: &[&str]| -> serde_json::Value {
        match doc {
            Some(d) => keys
                .iter()
                .map(|k| (k.to_string(), d.get(*k).cloned().unwrap_or_default()))
                .collect::<serde_json::Map<_, _>>()
                .into(),
            None => serde_json::Value::Null,
        }
    };
    let mut stages = serde_json::Map::new();
    stages.insert(
        "fit".into(),
        pick(&read("fit_diagnostics.json")?, &["snapshots", "ingest", "dropped_dates", "families"]),
    );
    for scheme in ["tail", "center"] {
        stages.insert(format!("rank_{scheme}"), pick(&read(&format!("rank_{scheme}.json"))?, &["per_family"]));
    }
    stages.insert(
        "markov".into(),
        pick(
            &read("markov.json")?,
            &["taus", "ratios", "markov_length_minutes", "markov_length_used_minutes", "source"],
        ),
    );
    stages.insert(
        "km".into(),
        pick(&read("km.json")?, &["k_raw", "k_corrected", "sigma2", "stationary_variance", "markov_length_used"]),
    );
    stages.insert(
        "ou".into(),
        pick(&read("ou.json")?, &["k", "sigma2", "sigma", "stationary_variance", "response_time"]),
    );
    stages.insert("acf".into(), pick(&read("acf.json")?, &["single", "short", "long", "inverse_k", "reliable"]));
    stages.insert("ou_check".into(), pick(&read("ou_check.json")?, &["checkpoints"]));
    stages.insert("evolution".into(), pick(&read("evolution.json")?, &["stochastic", "deterministic"]));
    if stages.values().all(serde_json::Value::is_null) {
        return Err(CliError::Input(format!("{}: no stage reports to summarise", cfg.out.display())));
    }
    #[derive(Serialize)]
    struct Report {
        stages: serde_json::Map<String, serde_json::Value>,
    }
    let report = Report { stages };
    formats::write_json(&cfg.out.join("report.json"), &meta, &report)?;
    Ok(serde_json::Value::Object(report.stages))
}
