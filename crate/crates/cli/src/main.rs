use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spikinghan::ErrorCategory;

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "spikinghan", version, about = "Train, evaluate and inspect SpikingHAN node classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train once per seed and write per-seed artifacts plus summary.json.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        /// JSON run configuration; every key is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repeatable. Overrides `seeds` from the config.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for running seeds in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print test Micro/Macro-F1 of a checkpoint.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Print attention weights, parameter count and spike statistics of a checkpoint.
    Inspect {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write a synthetic dataset directory.
    GenSynthetic {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(spikinghan::Error),
}

impl From<spikinghan::Error> for CliError {
    fn from(e: spikinghan::Error) -> Self {
        CliError::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Lib(e) => match e.category() {
                ErrorCategory::Config => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            },
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            data,
            config,
            seeds,
            out,
            jobs,
        } => commands::train(data, config, seeds, out, jobs),
        Command::Eval { data, checkpoint } => commands::eval(&data, &checkpoint),
        Command::Inspect { data, checkpoint } => commands::inspect(&data, &checkpoint),
        Command::GenSynthetic { spec, out } => commands::gen_synthetic(spec.as_deref(), &out),
    };
    match result {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable output"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::from(e.exit_code())
        }
    }
}
