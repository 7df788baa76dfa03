//! `transport-lab`: runs one experiment, prints its verdicts and writes the
//! report and series files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use transport_lab::{run_with_workers, ExperimentConfig, LabError};

#[derive(Debug, Parser)]
#[command(name = "transport-lab", version, about = "Experiments for stochastic transport by characteristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// L^p and seminorm persistence over time.
    Persistence(Flags),
    /// Zero-noise versus stochastic seminorm near the shear singularity.
    NoiseDemo(Flags),
    /// Mollified-drift solutions against the rough-drift solution.
    Uniqueness(Flags),
    /// Change-of-variables identity under datum mollification.
    IcStability(Flags),
    /// Local convergence under drift mollification.
    DriftStability(Flags),
    /// Weak-formulation residuals over the test-function catalog.
    WeakResidual(Flags),
    /// Flow-convergence statistics on a mollification ladder.
    FlowStats(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for the report and series files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo sampling.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Replace Brownian paths by zero noise.
    #[arg(long)]
    zero_noise: bool,
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Persistence(f) => ("persistence", f),
            Command::NoiseDemo(f) => ("noise-demo", f),
            Command::Uniqueness(f) => ("uniqueness", f),
            Command::IcStability(f) => ("ic-stability", f),
            Command::DriftStability(f) => ("drift-stability", f),
            Command::WeakResidual(f) => ("weak-residual", f),
            Command::FlowStats(f) => ("flow-stats", f),
        }
    }
}

fn run(name: &str, flags: Flags) -> Result<i32, LabError> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = flags.samples {
        cfg.samples = samples;
    }
    if let Some(out) = flags.out {
        cfg.out = Some(out);
    }
    cfg.zero_noise |= flags.zero_noise;
    let report = run_with_workers(name, &cfg, flags.workers)?;
    print!("{}", report.summary());
    if let Some(dir) = &cfg.out {
        for path in report.write_to(dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, flags) = cli.command.split();
    match run(name, flags) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
