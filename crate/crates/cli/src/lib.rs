//! Command-line experiments for renewal sign-kernel approximations:
//! ensemble simulation, verification suites and covariance reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod suites;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "renewal-gauss",
    version,
    about = "Simulate and verify renewal sign-kernel approximations of Gaussian processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble and write CSV plus a JSON sidecar.
    Simulate(RunArgs),
    /// Run verification suites and write a JSON summary.
    Verify(RunArgs),
    /// Write empirical against limiting covariances as CSV.
    Report(RunArgs),
}

/// Every flag overrides the matching key of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub exponent: Option<f64>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub level: Option<usize>,
    /// Uniform point count, or comma-separated points.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Suites to verify, comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub suite: Option<Vec<String>>,
    #[arg(long)]
    pub sample_scale: Option<f64>,
    #[arg(long)]
    pub dump_path: Option<u64>,
}

impl RunArgs {
    fn settings(&self) -> config::Settings {
        config::Settings {
            law: self.law.clone(),
            n: self.n,
            beta: self.beta,
            exponent: self.exponent,
            kernel: self.kernel.clone(),
            process: self.process.clone(),
            level: self.level,
            grid: self.grid.clone(),
            paths: self.paths,
            seed: self.seed,
            tol: self.tol,
            out: self.out.clone(),
            threads: self.threads,
            suite: self.suite.clone(),
            sample_scale: self.sample_scale,
            dump_path: self.dump_path,
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        config::load(self.config.as_deref(), self.settings())
    }
}

fn execute(command: &Command) -> Result<bool, CliError> {
    match command {
        Command::Simulate(a) => {
            for p in commands::run_simulate(&a.resolve()?)? {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Verify(a) => {
            let cfg = a.resolve()?;
            let outcome = commands::run_verify(&cfg, |s| {
                for r in &s.reports {
                    println!("{r}");
                }
                println!("{}: {}", s.name, if s.pass { "pass" } else { "FAIL" });
            })?;
            println!("wrote {}", outcome.summary_path.display());
            Ok(outcome.pass)
        }
        Command::Report(a) => {
            let p = commands::run_report(&a.resolve()?)?;
            println!("wrote {}", p.display());
            Ok(true)
        }
    }
}

/// Parse `args` and run; the return value is the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = Cli::command().after_help(RunConfig::help_text());
    let cli = match cmd
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match execute(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
