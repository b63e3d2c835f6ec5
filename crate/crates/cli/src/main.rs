//! `thermorev` command-line harness.

mod config;
mod error;
mod output;
mod run;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, Format, LatticeConfig, Protocol, RunConfig, Source};
use error::{CliError, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};

#[derive(Parser)]
#[command(name = "thermorev", version, about = "One-shot thermodynamics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Umegaki, smoothed min/max and hypothesis-testing divergences of ρ against σ or γ.
    Divergence(Flags),
    /// Thermo-majorization curve of a semiclassical state.
    Lorenz(Flags),
    /// Work of formation and distillable work.
    Work(Flags),
    /// Dephase-then-distill or reference-frame formation.
    Protocol(Flags),
    /// Divergence-rate scan of a state family on a chain.
    GapScan(Flags),
    /// Rate scan and reversibility verdict for a finite mixture.
    MixtureScan(Flags),
    /// Variance of a spatially averaged single-site observable.
    Variance(Flags),
}

impl Sub {
    fn split(self) -> (Command, Flags) {
        match self {
            Sub::Divergence(f) => (Command::Divergence, f),
            Sub::Lorenz(f) => (Command::Lorenz, f),
            Sub::Work(f) => (Command::Work, f),
            Sub::Protocol(f) => (Command::Protocol, f),
            Sub::GapScan(f) => (Command::GapScan, f),
            Sub::MixtureScan(f) => (Command::MixtureScan, f),
            Sub::Variance(f) => (Command::Variance, f),
        }
    }
}

/// Shared flags; each one overrides the config file.
#[derive(Args)]
struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run the built-in oracle suite for this subcommand instead.
    #[arg(long)]
    selftest: bool,
    /// Print the canonical configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// JSON file with the state ρ.
    #[arg(long)]
    rho: Option<PathBuf>,
    /// JSON file with the reference state σ.
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// JSON file with the Hamiltonian.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    /// JSON file with a single-site observable.
    #[arg(long)]
    observable: Option<PathBuf>,
    /// JSON file with a state family.
    #[arg(long)]
    family: Option<PathBuf>,
    /// Ising chain couplings as `J,h`.
    #[arg(long, value_parser = parse_ising)]
    ising: Option<(f64, f64)>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    battery_step: Option<f64>,
    #[arg(long, value_enum)]
    protocol: Option<Protocol>,
    /// Hamiltonian discretization width.
    #[arg(long)]
    delta: Option<f64>,
    /// Levels of the reference ladder.
    #[arg(long)]
    levels: Option<usize>,
    /// Output path (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn parse_ising(s: &str) -> Result<(f64, f64), String> {
    let (j, h) = s.split_once(',').ok_or("expected J,h")?;
    Ok((j.trim().parse().map_err(|e| format!("J: {e}"))?, h.trim().parse().map_err(|e| format!("h: {e}"))?))
}

fn path<T>(p: &Option<PathBuf>) -> Option<Source<T>> {
    p.clone().map(Source::Path)
}

impl Flags {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            command: None,
            rho: path(&self.rho),
            sigma: path(&self.sigma),
            hamiltonian: path(&self.hamiltonian),
            observable: path(&self.observable),
            family: path(&self.family),
            lattice: self.ising.map(|(j, h)| LatticeConfig::Ising { j, h }),
            epsilon: self.epsilon,
            beta: self.beta,
            n_list: self.n_list.clone(),
            bin_width: self.bin_width,
            battery_step: self.battery_step,
            protocol: self.protocol,
            delta: self.delta,
            levels: self.levels,
            output: self.output.clone(),
            format: self.format,
        }
    }
}

fn configure(command: Command, flags: &Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = file.command {
        if c != command {
            return Err(CliError::config(format!("config is for `{}`, not `{}`", c.name(), command.name())));
        }
    }
    let mut config = file.overlay(flags.overrides());
    config.command = Some(command);
    Ok(config.canonical())
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (command, flags) = cli.command.split();
    if flags.selftest {
        let rep = selftest::run(command)?;
        let ok = rep.failures.is_empty();
        println!("{}", thermorev::numfmt::to_json_pretty(&rep).expect("report serializes"));
        return Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL });
    }
    let config = configure(command, &flags)?;
    if flags.print_config {
        print!("{}", config.to_toml());
        return Ok(EXIT_OK);
    }
    config.validate()?;
    let report = run::run(&config)?;
    output::emit(&report, &config)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::config(e.to_string().trim_end()).to_json());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.status as u8)
        }
    }
}
