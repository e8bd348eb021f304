//! `wavenav`: batch front end for the simulate / estimate / map / evaluate chain.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use wavenav_core::config::RunConfig;
use wavenav_core::pipeline::{self, CLOUD, SENSOR_LOG, TRAJECTORY, TRUTH_CLOUD, TRUTH_HF};
use wavenav_core::Result;

#[derive(Parser, Debug)]
#[command(
    name = "wavenav",
    version,
    about = "Wave-aware dead reckoning and adaptive BKI mapping"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory. Overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// baseline | be_ukf | an_ukf | proposed | csm | bki | adaptive_bki
    #[arg(long, global = true)]
    variant: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Write a synthetic sensor log, ground truth and truth cloud.
    Simulate,
    /// Run the filter over a sensor log.
    Estimate {
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Build the occupancy map from a trajectory and the log's range beams.
    Map {
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a trajectory (and optionally a map cloud) against truth.
    Evaluate {
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// map cloud; skipped when neither this nor the default file exists
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        truth_cloud: Option<PathBuf>,
    },
    /// simulate, estimate, map and evaluate in one go.
    All,
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(v) = &cli.variant {
        cfg.apply_variant(v)?;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, out) = load(&cli)?;
    let or = |p: Option<PathBuf>, name: &str| p.unwrap_or_else(|| out.join(name));
    match cli.verb {
        Verb::Simulate => println!("{}", pipeline::cmd_simulate(&cfg, &out)?),
        Verb::Estimate { log } => println!("{}", pipeline::cmd_estimate(&cfg, &or(log, SENSOR_LOG), &out)?),
        Verb::Map { trajectory, log } => {
            let msg = pipeline::cmd_map(&cfg, &or(trajectory, TRAJECTORY), &or(log, SENSOR_LOG), &out)?;
            println!("{msg}");
        }
        Verb::Evaluate {
            trajectory,
            truth,
            cloud,
            truth_cloud,
        } => {
            let explicit = cloud.is_some();
            let cloud = or(cloud, CLOUD);
            let truth_cloud = or(truth_cloud, TRUTH_CLOUD);
            let clouds = (explicit || cloud.exists()).then_some((cloud.as_path(), truth_cloud.as_path()));
            let rep = pipeline::cmd_evaluate(&cfg, &or(trajectory, TRAJECTORY), &or(truth, TRUTH_HF), clouds, &out)?;
            print!("{}", rep.table());
        }
        Verb::All => print!("{}", pipeline::cmd_all(&cfg, &out)?.table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
