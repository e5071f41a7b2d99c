use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use expfam_ts::cli::{self, Command, ExperimentSpec, Overrides};

/// Thompson Sampling with Jeffreys priors: bandit simulations and concentration checks.
#[derive(Debug, Parser)]
#[command(name = "expfam-ts", version)]
struct Args {
    #[command(subcommand)]
    command: Option<Sub>,

    /// Flat key=value spec file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    horizon: Option<usize>,

    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Run a batch of bandit episodes and write trace.csv and summary.csv.
    Simulate,
    /// Run a concentration experiment and write concentration.csv.
    Concentration,
    /// Print the Lai-Robbins coefficient of the configured arms.
    LowerBound,
    /// Print the grammar of each supported family.
    ListFamilies,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Concentration => Command::Concentration,
            Sub::LowerBound => Command::LowerBound,
            Sub::ListFamilies => Command::ListFamilies,
        }
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let overrides = Overrides {
        command: args.command.map(Command::from),
        seed: args.seed,
        horizon: args.horizon,
        runs: args.runs,
        out: args.out,
    };
    let spec = match ExperimentSpec::load(args.config.as_deref(), &overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&spec) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(spec: &ExperimentSpec) -> expfam_ts::Result<ExitCode> {
    match spec.command {
        Command::ListFamilies => {
            for g in cli::family_grammars() {
                println!("{g}");
            }
        }
        Command::LowerBound => {
            println!("{:.4}", cli::run_lower_bound(spec)?);
        }
        Command::Simulate => {
            let report = cli::run_simulate(spec)?;
            if let Some(last) = report.summary.last() {
                println!(
                    "T={} mean_regret={:.4} stderr={:.4} regret/lnT={:.4} lai_robbins={:.4}",
                    last.t, last.mean_regret, last.stderr_regret, last.regret_over_log_t, last.lr_coefficient
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Concentration => {
            let report = cli::run_concentration(spec)?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if !report.violations.is_empty() {
                for &i in &report.violations {
                    let e = report.rows[i];
                    eprintln!(
                        "bound violated at row {i}: u={} empirical={:e} bound={:e} trials={}",
                        e.u, e.empirical_prob, e.bound, e.trials_used
                    );
                }
                return Ok(ExitCode::from(EXIT_VIOLATION));
            }
            println!("{} rows, no bound violations", report.rows.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}
