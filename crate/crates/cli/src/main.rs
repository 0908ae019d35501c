use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use ancsim_cli::experiments::{run_oracle_check, run_outage_sweep, run_variance_sweep, write_csv};
use ancsim_cli::{Config, Mode};
use anyhow::{Context, Result};
use clap::Parser;

/// Monte Carlo sweeps of ANC noise variance and outage probability.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// TOML experiment file
    #[arg(long)]
    config: PathBuf,
    /// Override the configured mode
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count (outage trials, ensemble draws, or oracle noise draws)
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination; stdout when neither this nor the config sets one
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: Args) -> Result<bool> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.trials {
        anyhow::ensure!(n > 0, "--trials must be at least 1");
        match cfg.mode {
            Mode::VarianceSweep => cfg.variance.n_draws = n,
            Mode::OutageSweep => cfg.outage.n_trials = n,
            Mode::OracleCheck => cfg.oracle.n_noise_draws = n,
        }
    }
    if let Some(w) = args.workers {
        anyhow::ensure!(w > 0, "--workers must be at least 1");
        cfg.workers = Some(w);
    }
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()?;
    }
    log::info!("mode {}, seed {}", cfg.mode, cfg.seed);

    let out: Box<dyn Write> = match args.out.or(cfg.output.clone()) {
        Some(p) => Box::new(BufWriter::new(
            File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    match cfg.mode {
        Mode::VarianceSweep => write_csv(&run_variance_sweep(&cfg)?, out)?,
        Mode::OutageSweep => write_csv(&run_outage_sweep(&cfg)?, out)?,
        Mode::OracleCheck => {
            let report = run_oracle_check(&cfg)?;
            write_csv(&report.rows, out)?;
            if !report.all_pass {
                let failed = report.rows.iter().filter(|r| !r.pass).count();
                log::error!(
                    "{failed} of {} realizations exceeded the tolerance",
                    report.rows.len()
                );
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
