use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flankwear_cli::commands;
use flankwear_cli::config::{self, Overrides, PipelineConfig};
use flankwear_core::Error;

/// Drill flank-wear prediction pipeline.
#[derive(Debug, Parser)]
#[command(name = "flankwear", version, about)]
struct Cli {
    /// Path to the pipeline TOML config; omit to run with built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root directory (overrides config file and environment).
    #[arg(long, global = true)]
    out_root: Option<PathBuf>,

    /// Worker threads for per-region stages and tuner trials.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Training seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic drilling campaign (signals, markers, wear).
    Simulate,
    /// Isolate per-hole cutting segments from the recording.
    Segment,
    /// Extract, smooth, and select per-hole features.
    Extract,
    /// Expand sparse wear measurements into a per-hole target curve.
    Quantize,
    /// Build windowed, split, scaled datasets per region.
    Build {
        /// Restrict to one region by name.
        #[arg(long)]
        region: Option<String>,
    },
    /// Train one model per region.
    Train {
        #[arg(long)]
        region: Option<String>,
    },
    /// Run the hyperparameter search on one region.
    Tune {
        #[arg(long)]
        region: Option<String>,
    },
    /// Evaluate trained models on their test splits.
    Evaluate {
        #[arg(long)]
        region: Option<String>,
    },
    /// Run every stage end to end and write the combined report.
    Pipeline,
}

/// Maps an error to the process exit code: 1 configuration, 2 data or
/// file problems, 3 numeric failures.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Segmentation(_)
        | Error::Region(_)
        | Error::Dataset(_)
        | Error::Index(_)
        | Error::Dimension(_)
        | Error::Lineage(_) => 2,
        Error::Domain(_) | Error::Numeric(_) | Error::Scaling(_) | Error::Internal(_) => 3,
    }
}

fn load(cli: &Cli) -> Result<PipelineConfig, Error> {
    let overrides = Overrides {
        out_root: cli.out_root.clone(),
        threads: cli.threads,
        seed: cli.seed,
    };
    match &cli.config {
        Some(path) => config::load_config(path, &overrides),
        None => {
            let mut cfg = PipelineConfig::default();
            if let Some(root) = &overrides.out_root {
                cfg.output.root = root.clone();
            }
            if let Some(threads) = overrides.threads {
                cfg.output.threads = threads;
            }
            if let Some(seed) = overrides.seed {
                cfg.training.seed = seed;
            }
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn run(cli: &Cli) -> Result<String, Error> {
    let cfg = load(cli)?;
    match &cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Segment => commands::cmd_segment(&cfg),
        Command::Extract => commands::cmd_extract(&cfg),
        Command::Quantize => commands::cmd_quantize(&cfg),
        Command::Build { region } => commands::cmd_build(&cfg, region.as_deref()),
        Command::Train { region } => commands::cmd_train(&cfg, region.as_deref()),
        Command::Tune { region } => commands::cmd_tune(&cfg, region.as_deref()),
        Command::Evaluate { region } => commands::cmd_evaluate(&cfg, region.as_deref()),
        Command::Pipeline => commands::cmd_pipeline(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" that should exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
