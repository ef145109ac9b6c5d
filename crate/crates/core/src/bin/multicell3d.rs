use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multicell3d::config::RunConfig;
use multicell3d::experiments;

#[derive(Parser)]
#[command(name = "multicell3d", version, about = "Tilt and transmission-mode analysis for a three-cell 3D beamforming cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic vs Monte-Carlo conditional rates along a BS-to-centre segment.
    ValidateRates(Common),
    /// Edge/average/peak throughput against a common tilt for both modes.
    TiltSweep(Common),
    /// Grid search over interior radius and per-region tilts.
    OptimizeRegions(Common),
    /// Scheduled system simulation of the five reference schemes.
    CompareSystems(Common),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
}

type Experiment = fn(&RunConfig, &Path) -> multicell3d::Result<Vec<PathBuf>>;

fn run(cli: Cli) -> multicell3d::Result<Vec<PathBuf>> {
    let (common, run): (&Common, Experiment) = match &cli.command {
        Command::ValidateRates(c) => (c, experiments::run_validate_rates),
        Command::TiltSweep(c) => (c, experiments::run_tilt_sweep),
        Command::OptimizeRegions(c) => (c, experiments::run_optimize_regions),
        Command::CompareSystems(c) => (c, experiments::run_compare_systems),
    };
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = common.threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    run(&cfg, &cfg.output_dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
