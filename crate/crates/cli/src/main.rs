//! `manipulant`: synthesize or ingest motion trials, compute manipulability
//! profiles, learn a desired profile and track it on a simulated robot.
//!
//! Exit codes: 0 success, 1 user error (arguments, configuration, input
//! files), 2 numerical failure (divergence, non-convergence, singularities).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod provenance;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manipulant_core::analysis::{ArmSelection, FrameTag};
use manipulant_core::mocap::Task;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    /// Diagnostic trace written before failing, if any.
    pub trace: Option<PathBuf>,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
            trace: None,
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
            trace: None,
        }
    }
}

impl From<manipulant_core::Error> for CliError {
    fn from(e: manipulant_core::Error) -> Self {
        if e.is_numerical() {
            CliError::numerical(e.to_string())
        } else {
            CliError::user(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "manipulant",
    version,
    about = "Manipulability profiles: analysis, learning and tracking"
)]
struct Cli {
    /// Pipeline configuration (TOML with [robot], [ingest], [analysis], [gmm],
    /// [controller] and [report] sections). MANIPULANT_SEED overrides every seed.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic trials for a task.
    Synth {
        /// SL, SM, SH, C5 or C10.
        #[arg(long)]
        task: Task,
        /// Participant seed (the first one when --count > 1).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of participants; with more than one, --out is a directory.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Amplitude of the smooth trajectory noise (meters).
        #[arg(long)]
        noise: Option<f64>,
        /// Output trial file, or directory when --count > 1.
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate every trial in a directory and summarize it.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        /// Summary JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute ellipsoids and the inter-participant profile of a set of trials.
    Analyze {
        #[arg(long)]
        dir: PathBuf,
        /// Output directory for ellipsoids.jsonl, profile.json and indices.csv.
        #[arg(long)]
        out: PathBuf,
        /// Expected task; trials of another task are rejected.
        #[arg(long)]
        task: Option<Task>,
        /// right, left or dual.
        #[arg(long)]
        arm: Option<ArmSelection>,
        /// shoulder or neck.
        #[arg(long)]
        frame: Option<FrameTag>,
        #[arg(long)]
        frames_per_action: Option<usize>,
    },
    /// Fit a time-driven mixture model to analyzed ellipsoids.
    LearnProfile {
        /// Ellipsoid records written by `analyze`.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Number of mixture components.
        #[arg(long = "K", visible_alias = "k")]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a learned (or constant) manipulability profile on a robot.
    Track {
        /// Bundled model name (arm7, planar2, planar3) or description file.
        #[arg(long)]
        robot: Option<String>,
        /// Output of `learn-profile`, or {"constant": [[...], ...]}.
        #[arg(long)]
        profile: PathBuf,
        /// Controller TOML (the fields of the [controller] section).
        #[arg(long)]
        cfg: Option<PathBuf>,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit CSV tracks and SVG plots of a tracking run.
    Report {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth {
            task,
            seed,
            count,
            noise,
            out,
        } => {
            if let Some(s) = seed {
                cfg.ingest.seed = s;
            }
            if let Some(n) = noise {
                cfg.ingest.noise_level = n;
            }
            cfg.apply_seed_env()?;
            commands::synth(&cfg, task, count, &out)
        }
        Command::Ingest { dir, out } => commands::ingest(&cfg, &dir, out.as_deref()),
        Command::Analyze {
            dir,
            out,
            task,
            arm,
            frame,
            frames_per_action,
        } => {
            if let Some(a) = arm {
                cfg.analysis.arm = a;
            }
            if let Some(f) = frame {
                cfg.analysis.frame = f;
            }
            if let Some(n) = frames_per_action {
                cfg.analysis.frames_per_action = n;
            }
            commands::analyze(&cfg, &dir, &out, task)
        }
        Command::LearnProfile { input, k, seed, out } => {
            if let Some(k) = k {
                cfg.gmm.k = k;
            }
            if let Some(s) = seed {
                cfg.gmm.seed = s;
            }
            cfg.apply_seed_env()?;
            commands::learn_profile(&cfg, &input, &out)
        }
        Command::Track {
            robot,
            profile,
            cfg: controller,
            duration,
            out,
        } => {
            if let Some(path) = controller {
                cfg.merge_controller_file(&path)?;
            }
            if let Some(r) = robot {
                cfg.robot.model = r;
            }
            if let Some(d) = duration {
                cfg.controller.duration = d;
            }
            commands::track(&cfg, &profile, &out)
        }
        Command::Report { input, out } => report::report(&cfg, &input, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if let Some(trace) = &e.trace {
                eprintln!("diagnostic trace: {}", trace.display());
            }
            ExitCode::from(e.code)
        }
    }
}
