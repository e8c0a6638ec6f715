// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use tecusum_cli::{
    calibrate, detect, report, simulate, CliError, DetectMode, DetectOptions, ExperimentConfig,
    ReportStatus,
};

#[derive(Parser)]
#[command(name = "tecusum", version, about = "Temporary-event CUSUM experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of runs per scenario.
    #[arg(long)]
    runs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output = out.clone();
        }
        if let Some(runs) = self.runs {
            config.runs = runs;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Oneshot,
    Cyclical,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate thresholds of every method to the target ARL2FA.
    Calibrate(Common),
    /// Run the scenario grid with calibrated thresholds.
    Simulate(Common),
    /// Apply calibrated detectors to a CSV stream.
    Detect {
        #[command(flatten)]
        common: Common,
        /// CSV file with a header of sensor names; `-` reads stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "oneshot")]
        mode: Mode,
        /// Use this threshold instead of the calibration record.
        #[arg(long)]
        threshold: Option<f64>,
        /// Only run this method.
        #[arg(long)]
        method: Option<String>,
        /// Alarm output (JSON lines); stdout by default.
        #[arg(long)]
        alarms: Option<PathBuf>,
    },
    /// Summarise the results in a directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Calibrate(common) => {
            let file = calibrate(&common.load()?)?;
            for m in &file.methods {
                println!(
                    "{:<10} h = {:<10.5} ARL {:>9.0} (verified {:>9.0} +/- {:.0}){}",
                    m.name,
                    m.threshold,
                    m.achieved_arl,
                    m.verified_arl,
                    m.verified_standard_error,
                    if m.converged { "" } else { "  [not converged]" }
                );
            }
        }
        Command::Simulate(common) => {
            let summary = simulate(&common.load()?)?;
            for s in &summary.scenarios {
                let rates: Vec<String> = s
                    .methods
                    .iter()
                    .map(|m| format!("{} {:.3}", m.name, m.rate_at_end_of_exposure))
                    .collect();
                println!("{:<16} {}", s.name, rates.join("  "));
            }
        }
        Command::Detect {
            common,
            input,
            mode,
            threshold,
            method,
            alarms,
        } => {
            let config = common.load()?;
            let options = DetectOptions {
                mode: match mode {
                    Mode::Oneshot => DetectMode::OneShot,
                    Mode::Cyclical => DetectMode::Cyclical,
                },
                threshold,
                method,
            };
            let reader: Box<dyn io::Read> = if input.as_os_str() == "-" {
                Box::new(io::stdin().lock())
            } else {
                Box::new(BufReader::new(File::open(&input).map_err(|source| {
                    CliError::Io {
                        path: input.clone(),
                        source,
                    }
                })?))
            };
            let writer: Box<dyn Write> = match &alarms {
                Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
                    CliError::Io {
                        path: path.clone(),
                        source,
                    }
                })?)),
                None => Box::new(io::stdout().lock()),
            };
            let found = detect(&config, &options, reader, writer)?;
            eprintln!("{} alarm(s)", found.len());
        }
        Command::Report { results } => {
            let status = report(&results, io::stdout().lock())?;
            if let ReportStatus::Partial { missing, cells } = status {
                eprintln!("{missing} of {cells} cells missing");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
