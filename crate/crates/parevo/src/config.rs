//! Flat key-value pipeline configuration.

use std::path::{Path, PathBuf};

use parevo_core::divergence::WeightScheme;
use parevo_core::ingest::TradingCalendar;
use parevo_core::ModelFamily;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every knob of the pipeline; one TOML table with no nesting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Record CSVs for `fit`; empty means `<out>/dataset.csv`.
    pub input: Vec<PathBuf>,
    /// Parameter CSV for `rank` and `langevin`; defaults to `<out>/params.csv`.
    pub params: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub session_open_minute: i64,
    pub session_length_intervals: u32,
    pub interval_minutes: u32,
    pub min_entities: usize,
    pub min_sample: usize,

    /// `"tail"` or `"center"`; both are always computed, this one leads the summary.
    pub weight_scheme: String,

    pub family: ModelFamily,
    pub window_days: usize,
    pub phi_degree: usize,
    pub theta_degree: usize,
    pub markov_bins: usize,
    pub markov_min_count: usize,
    pub markov_slice_width: f64,
    pub band: [f64; 2],
    pub markov_lags_minutes: Vec<u32>,
    /// Used when no scanned lag falls in the band.
    pub fallback_markov_length_minutes: u32,
    pub km_bins: usize,
    pub km_min_count: usize,
    pub km_window_factor: f64,
    pub acf_max_lag_minutes: u32,

    pub sim_days: usize,
    pub sim_entities: usize,
    pub sim_first_day: i64,
    pub sim_k: f64,
    pub sim_sigma: f64,
    pub phi_coeffs: Vec<f64>,
    pub theta_coeffs: Vec<f64>,
    pub max_rejection_rate: f64,
    pub ensemble_paths: usize,
    pub ensemble_steps_per_response_time: usize,
    pub evolution_paths: usize,
    pub evolution_levels: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: Vec::new(),
            params: None,
            out: PathBuf::from("out"),
            seed: 42,
            session_open_minute: 540,
            session_length_intervals: 39,
            interval_minutes: 10,
            min_entities: 10,
            min_sample: 10,
            weight_scheme: "tail".into(),
            family: ModelFamily::InverseGamma,
            window_days: 20,
            phi_degree: 3,
            theta_degree: 2,
            markov_bins: 40,
            markov_min_count: 50,
            markov_slice_width: 0.1,
            band: [0.9, 1.1],
            markov_lags_minutes: (1..=12).map(|m| 10 * m).collect(),
            fallback_markov_length_minutes: 60,
            km_bins: 20,
            km_min_count: 100,
            km_window_factor: 3.0,
            acf_max_lag_minutes: 380,
            sim_days: 60,
            sim_entities: 2000,
            sim_first_day: 19_000,
            sim_k: 2.02e-4,
            sim_sigma: 1.34e-4,
            phi_coeffs: vec![0.972, 1.33e-3, -7.97e-5, 1.55e-6],
            theta_coeffs: vec![4.45e6, -2.77e5, 6.97e3],
            max_rejection_rate: 0.1,
            ensemble_paths: 10_000,
            ensemble_steps_per_response_time: 100,
            evolution_paths: 400,
            evolution_levels: 5,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.calendar().validate().map_err(|e| CliError::Input(format!("calendar: {e}")))?;
        self.scheme()?;
        if self.band.iter().any(|b| b.is_nan()) || self.band[0] >= self.band[1] {
            return Err(CliError::Input(format!("band {:?} is empty", self.band)));
        }
        let step = self.interval_minutes;
        for &m in
            self.markov_lags_minutes.iter().chain([&self.fallback_markov_length_minutes, &self.acf_max_lag_minutes])
        {
            if m == 0 || m % step != 0 {
                return Err(CliError::Input(format!("lag of {m} min is not a positive multiple of {step} min")));
            }
        }
        Ok(())
    }

    pub fn calendar(&self) -> TradingCalendar {
        TradingCalendar {
            session_open_minute: self.session_open_minute,
            session_length_intervals: self.session_length_intervals,
            interval_minutes: self.interval_minutes,
        }
    }

    pub fn scheme(&self) -> Result<WeightScheme, CliError> {
        match self.weight_scheme.as_str() {
            "tail" => Ok(WeightScheme::TAIL),
            "center" => Ok(WeightScheme::CENTER),
            other => Err(CliError::Input(format!("unknown weight scheme {other:?}"))),
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        if self.input.is_empty() {
            vec![self.out.join("dataset.csv")]
        } else {
            self.input.clone()
        }
    }

    pub fn params_path(&self) -> PathBuf {
        self.params.clone().unwrap_or_else(|| self.out.join("params.csv"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config is always representable");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
