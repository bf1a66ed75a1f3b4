//! `fomcsim` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | unexpected I/O failure |
//! | 2 | invalid config, input file or command line; missing credential |
//! | 3 | a meeting failed during a stage, or a strict probe failed |
//! | 4 | evaluation error (ground truth, pairing, transcripts) |

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fomcsim_core::config::{BackendKind, Overrides};
use fomcsim_core::units::MeetingDate;

#[derive(Parser, Debug)]
#[command(name = "fomcsim", version, about = "Simulate and evaluate monetary policy committee meetings")]
struct Cli {
    /// More operator logging on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one meeting and print the decision.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Meeting date, YYYY-MM.
        #[arg(long)]
        meeting: MeetingDate,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run every meeting in the config and write a campaign summary.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Meetings to run at once.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Score transcripts against the real decisions.
    Evaluate {
        /// Directory of transcript JSON files.
        transcripts: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check how well agents absorbed the materials.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        meeting: MeetingDate,
        /// Ask an un-briefed session about the Beige Book instead, and show
        /// its answer beside the source text.
        #[arg(long)]
        contamination: bool,
        /// District asked about with --contamination.
        #[arg(long, default_value = "Cleveland")]
        district: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print a transcript stage by stage.
    Replay {
        transcript: PathBuf,
        /// Print the canonical JSON re-serialization instead.
        #[arg(long)]
        canonical: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Flags that override config file and environment values.
#[derive(Args, Debug, Default)]
struct OverrideArgs {
    /// scripted, live or echo.
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    templates_dir: Option<PathBuf>,
    /// Seed for every selected meeting.
    #[arg(long)]
    seed: Option<u64>,
    /// Debate turns per voter.
    #[arg(long)]
    turns: Option<usize>,
    /// Run the comprehension probe during setup.
    #[arg(long)]
    probe: bool,
    /// Fail the meeting when a probe fails.
    #[arg(long)]
    strict_probe: bool,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            backend: self.backend,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            output_dir: self.output_dir.clone(),
            templates_dir: self.templates_dir.clone(),
            seed: self.seed,
            probe_enabled: self.probe.then_some(true),
            strict_probe: self.strict_probe.then_some(true),
            turns_per_voter: self.turns,
        }
    }
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Io(anyhow::Error),
    Config(anyhow::Error),
    Stage(anyhow::Error),
    Evaluation(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Stage(_) => 3,
            Failure::Evaluation(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Io(e) | Failure::Config(e) | Failure::Stage(e) | Failure::Evaluation(e) => e,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match cli.command {
        Command::Run { config, meeting, overrides } => commands::run(&config, meeting, &overrides.to_overrides()),
        Command::Campaign { config, parallel, overrides } => {
            commands::campaign(&config, parallel, &overrides.to_overrides())
        }
        Command::Evaluate { transcripts, ground_truth, format, output } => {
            commands::evaluate(&transcripts, &ground_truth, format == Format::Json, output.as_deref())
        }
        Command::Probe { config, meeting, contamination, district, overrides } => {
            commands::probe(&config, meeting, contamination, &district, &overrides.to_overrides())
        }
        Command::Replay { transcript, canonical } => commands::replay(&transcript, canonical),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
