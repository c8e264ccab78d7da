use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otd_harness::check::run_suite;
use otd_harness::config::{defaults_help, parse_config};
use otd_harness::dmd_cmd::dmd_command;
use otd_harness::error::HarnessError;
use otd_harness::run::run_ensemble;
use otd_harness::stats_cmd::{stats_command, StatsOptions};

#[derive(Parser)]
#[command(name = "otd", version, about = "OTD-mode experiments: simulate, score and check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory or a seeded ensemble (seeds = base seed + index).
    #[command(after_help = defaults_help())]
    Simulate {
        /// Configuration file (`key = value` lines, `#` comments).
        #[arg(long)]
        config: PathBuf,
        /// Base seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        trajectories: usize,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Conditional density and P_EE curve from record files.
    Stats(StatsArgs),
    /// Offline DMD indicator from archived Kolmogorov snapshots.
    Dmd {
        /// Run directory holding config.txt and traj_* subdirectories.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite.
    Check,
}

#[derive(Args)]
struct StatsArgs {
    /// Record files, or run / trajectory directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Indicator column.
    #[arg(long, default_value = "lambda_1")]
    indicator: String,
    /// Column whose future maximum is predicted.
    #[arg(long, default_value = "D")]
    observable: String,
    #[arg(long, default_value_t = 3.0)]
    t_i: f64,
    #[arg(long, default_value_t = 5.0)]
    t_f: f64,
    /// Extreme-event threshold.
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    #[arg(long, default_value_t = 50)]
    alpha_bins: usize,
    #[arg(long, default_value_t = 50)]
    q_bins: usize,
    /// Ignore records before this time.
    #[arg(long)]
    t_min: Option<f64>,
    /// Minimum samples in an indicator bin for a reported P_EE.
    #[arg(long, default_value_t = otd_core::stats::MIN_COLUMN_COUNT)]
    min_count: usize,
    /// Record file name looked up inside directories.
    #[arg(long, default_value = "records.csv")]
    records_name: String,
    /// Directory receiving density.csv and pee.csv.
    #[arg(long, default_value = "stats")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            trajectories,
            jobs,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| HarnessError::io(&config, e))?;
            let mut cfg = parse_config(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let reports = run_ensemble(&cfg, trajectories, cfg.seed, jobs, &cfg.out)?;
            for r in &reports {
                match &r.outcome {
                    Ok(s) => println!("traj {:04} seed {}: {} records to t = {}", r.index, r.seed, s.records, s.final_time),
                    Err(m) => println!("traj {:04} seed {}: FAILED {m}", r.index, r.seed),
                }
            }
            let failed = reports.iter().filter(|r| !r.ok()).count();
            if failed > 0 {
                return Err(HarnessError::Run(format!(
                    "{failed} of {} trajectories failed (see {})",
                    reports.len(),
                    cfg.out.join("manifest.csv").display()
                )));
            }
            Ok(())
        }
        Command::Stats(a) => {
            let mut opts = StatsOptions::new(&a.indicator, &a.observable, a.t_i, a.t_f, a.threshold);
            opts.alpha_bins = a.alpha_bins;
            opts.q_bins = a.q_bins;
            opts.min_count = a.min_count;
            opts.records_name = a.records_name;
            if let Some(t) = a.t_min {
                opts.t_min = t;
            }
            let r = stats_command(&a.inputs, &opts, &a.out)?;
            println!("{} files, {} samples", r.files.len(), r.pairs.len());
            println!("alpha,p_ee,std_error,count");
            for (al, p, e) in r.pee.populated() {
                println!("{al:.4},{p:.4},{e:.4}");
            }
            println!("rank correlation (alpha, P_EE): {:.3}", r.rank_correlation());
            Ok(())
        }
        Command::Dmd { out } => {
            for s in dmd_command(&out)? {
                println!("{}: rank {}, {} records", s.dir.display(), s.rank, s.records);
            }
            Ok(())
        }
        Command::Check => {
            let results = run_suite();
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(HarnessError::Run(format!("{failed} invariant checks failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
