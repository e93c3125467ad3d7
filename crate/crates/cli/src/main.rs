//! `matclass`: synthetic radar sweeps of rotating containers, peak-statistic
//! features, a small dense classifier, and confusion-matrix evaluation, as
//! one deterministic command-line pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use matclass_cli::config::PipelineConfig;
use matclass_cli::{commands, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "matclass",
    version,
    about = "Container-material classification from synthetic radar sweeps"
)]
struct Cli {
    /// TOML pipeline configuration; absent sections take built-in defaults
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding both the generator and trainer seeds
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Suppress informational output; errors still go to stderr
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic windows file
    Generate {
        /// Output windows file (default: the configured paths.windows)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Reduce each window of a windows file to one feature row
    Extract {
        /// Input windows file (default: the configured paths.windows)
        #[arg(value_name = "WINDOWS")]
        windows: Option<PathBuf>,
        /// Output features file (default: the configured paths.features)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Train the classifier on a features file
    Train {
        /// Input features file (default: the configured paths.features)
        #[arg(value_name = "FEATURES")]
        features: Option<PathBuf>,
        /// Output model file (default: the configured paths.model)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained model against a features file
    Eval {
        /// Model file (default: the configured paths.model)
        #[arg(value_name = "MODEL")]
        model: Option<PathBuf>,
        /// Features file (default: the configured paths.features)
        #[arg(value_name = "FEATURES")]
        features: Option<PathBuf>,
        /// Output report file (default: the configured paths.report)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Score every row instead of the model's recorded held-out rows
        #[arg(long)]
        all_rows: bool,
    },
    /// Print predicted class and probabilities for each window
    Predict {
        /// Model file (default: the configured paths.model)
        #[arg(value_name = "MODEL")]
        model: Option<PathBuf>,
        /// Windows file (default: the configured paths.windows)
        #[arg(value_name = "WINDOWS")]
        windows: Option<PathBuf>,
        /// Write prediction lines here instead of stdout
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run generate, extract, train, and eval end to end, then gate on
    /// held-out accuracy
    Demo {
        /// Keep artifacts in this directory instead of a temp dir
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = PipelineConfig::resolve(cli.config.as_deref(), cli.seed)?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Generate { out } => commands::generate(&config, out.as_deref(), quiet),
        Command::Extract { windows, out } => {
            commands::extract(&config, windows.as_deref(), out.as_deref(), quiet)
        }
        Command::Train { features, out } => {
            commands::train(&config, features.as_deref(), out.as_deref(), quiet)
        }
        Command::Eval { model, features, out, all_rows } => commands::eval(
            &config,
            model.as_deref(),
            features.as_deref(),
            out.as_deref(),
            all_rows,
            quiet,
        ),
        Command::Predict { model, windows, out } => {
            commands::predict_windows(&config, model.as_deref(), windows.as_deref(), out.as_deref())
        }
        Command::Demo { out } => commands::demo(&config, out.as_deref(), quiet),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as clap errors too; they keep
            // their success status while real usage errors exit 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
