use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sibandit::harness::{self, plot, ExperimentConfig};
use sibandit::Error;

/// Single-index contextual bandit simulator.
#[derive(Parser)]
#[command(name = "sibandit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write traces and summaries.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the single-index model to a CSV of x_1..x_d,y rows.
    Regress {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the link smoothness for an adaptive config.
    Smoothness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG charts from a summary CSV.
    Plot {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Config(msg),
            other => Failure::Runtime(other),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            trials,
            seed,
            threads,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.output.as_ref().map(PathBuf::from))
                .ok_or_else(|| Failure::Config("no output directory: pass --out or set `output`".into()))?;
            if let Some(n) = threads {
                if n == 0 {
                    return Err(Failure::Config("--threads must be positive".into()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Failure::Runtime(Error::Config(e.to_string())))?;
            }
            let result = harness::run_experiment(&cfg)?;
            harness::write_experiment(&result, &out)?;
            println!(
                "{} trials of {} over {} rounds: terminal mean regret {:.4}; wrote {}",
                cfg.trials,
                cfg.algorithm.name(),
                cfg.horizon,
                result.terminal_mean_regret(),
                out.display()
            );
        }
        Command::Regress { data, beta, out } => {
            if beta.is_nan() || beta <= 0.0 {
                return Err(Failure::Config(format!("--beta must be positive, got {beta}")));
            }
            let report = harness::regress_file(&data, beta, &out)?;
            println!(
                "n={} d={} index={:?} bandwidth={:.5}; wrote {}",
                report.n,
                report.d,
                report.index,
                report.bandwidth,
                out.display()
            );
        }
        Command::Smoothness { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let estimates = harness::run_smoothness(&cfg)?;
            harness::write_smoothness_outputs(&estimates, &out)?;
            for (i, e) in estimates.iter().enumerate() {
                println!("trial {i}: beta_est={:.4} b_max={:.4} N0={}", e.beta_est, e.b_max, e.n0);
            }
        }
        Command::Plot { summary, out } => {
            for path in plot::emit_plots(&summary, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
