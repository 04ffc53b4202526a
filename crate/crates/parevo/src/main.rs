use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use parevo::pipeline;
use parevo::{CliError, PipelineConfig};

/// Fit, rank and model the time evolution of cross-sectional distribution parameters.
#[derive(Parser)]
#[command(name = "parevo", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest records and fit the four families to every snapshot.
    Fit,
    /// Rank the fitted families by weighted divergence.
    Rank,
    /// Detrend, Markov scan, drift and diffusion, OU extraction.
    Langevin,
    /// Generate a synthetic dataset and the simulation checks.
    Simulate,
    /// Summarise the reports found in the output directory.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Rank => "rank",
            Command::Langevin => "langevin",
            Command::Simulate => "simulate",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli, cfg: &PipelineConfig) -> Result<(), CliError> {
    match cli.command {
        Command::Fit => {
            let r = pipeline::cmd_fit(cfg)?;
            let d = &r.diagnostics;
            println!(
                "{} snapshots fitted ({} records kept, {} masked, {} dropped, {} bad rows)",
                d.snapshots,
                d.ingest.kept,
                d.ingest.masked,
                d.ingest.dropped,
                d.row_errors.len()
            );
            for date in &d.dropped_dates {
                println!("dropped day {date}");
            }
        }
        Command::Rank => {
            for r in pipeline::cmd_rank(cfg)? {
                println!("{}:", r.scheme);
                for (name, s) in &r.per_family {
                    println!("  {name:<14} {:.4} ± {:.4}  ranks {:?}", s.mean, s.std, s.rank_histogram);
                }
            }
        }
        Command::Langevin => {
            let r = pipeline::cmd_langevin(cfg)?;
            println!(
                "markov length {} min ({}), k = {:.4e} /s, sigma^2 = {:.4e} /s, sigma^2/2k = {:.4e}, 1/k = {:.4e} s",
                r.markov.markov_length_used_minutes,
                r.markov.source,
                r.ou.k,
                r.ou.sigma2,
                r.ou.stationary_variance,
                r.ou.response_time
            );
        }
        Command::Simulate => {
            let r = pipeline::cmd_simulate(cfg)?;
            println!(
                "{} snapshots of {} entities written to {} ({} rejected OU steps)",
                r.dataset.series.trading_count(),
                cfg.sim_entities,
                r.dataset_path.display(),
                r.dataset.rejections
            );
            let ok = r.ou_check.checkpoints.iter().filter(|c| c.within_3se).count();
            println!("OU checkpoints within 3 SE: {ok}/{}", r.ou_check.checkpoints.len());
            println!(
                "moment SDE strong order: stochastic {:.3}, deterministic {:.3}",
                r.evolution.stochastic.fitted_order, r.evolution.deterministic.fitted_order
            );
        }
        Command::Report => {
            let v = pipeline::cmd_report(cfg)?;
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        }
    }
    Ok(())
}

fn log_run(cfg: &PipelineConfig, command: &str, elapsed: f64, outcome: &str) {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let line = format!("{stamp} {command} config_hash={} seed={} {elapsed:.3}s {outcome}\n", cfg.hash(), cfg.seed);
    let _ = std::fs::create_dir_all(&cfg.out);
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(cfg.out.join("run.log")) {
        let _ = f.write_all(line.as_bytes());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match PipelineConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let result = run(&cli, &cfg);
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            log_run(&cfg, cli.command.name(), elapsed, "ok");
            ExitCode::SUCCESS
        }
        Err(e) => {
            log_run(&cfg, cli.command.name(), elapsed, &format!("exit {}", e.exit_code()));
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
