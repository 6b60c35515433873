//! `csda`: command-line driver for the continuous severity augmentation pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use csda_core::parallel::{set_parallelism, Parallelism};
use csda_core::pipeline::{self, RunContext};
use csda_core::CsdaError;
use serde::Serialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "csda", version, about = "Continuous severity data augmentation: csGAN, augmentation, regression and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; overrides `[paths] workdir`.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Replaces the seed of every config section.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic dataset generation.
    #[command(subcommand)]
    Data(DataCommand),
    /// csGAN training and diagnostics.
    #[command(subcommand)]
    Gan(GanCommand),
    /// Generate the ε-grid augmented dataset from the trained csGAN.
    Augment,
    /// Train the severity regressor for `regressor.mode`.
    Train,
    /// Evaluate the trained regressor on the test split.
    Evaluate,
    /// Cross-validation with method comparison.
    Cv,
    /// Order loss and linearity residual of StyleSets stored as JSON.
    Style {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Build the synthetic dataset, manifest and calibration table.
    Gen,
}

#[derive(Subcommand)]
enum GanCommand {
    /// Train the csGAN on the training split.
    Train,
    /// Train with and without the order loss and compare style linearity.
    AblateOrder,
    /// Export StyleSets of fresh latents from the trained csGAN.
    Styles {
        #[arg(long, default_value_t = 16)]
        count: usize,
    },
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn context(global: &GlobalArgs) -> anyhow::Result<RunContext> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| CsdaError::Config("--config <path> is required for this command".into()))?;
    Ok(RunContext::load(path, global.workdir.as_deref(), global.seed)?)
}

fn show_path(p: &Path) {
    println!("{}", p.display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.global.sequential {
        set_parallelism(Parallelism::Sequential);
    }
    match cli.command {
        Command::Style { input } => {
            let diagnostics = pipeline::style_diagnostics(&input).with_context(|| format!("reading {}", input.display()))?;
            print_json(&diagnostics)
        }
        Command::Data(DataCommand::Gen) => {
            show_path(&pipeline::data_gen(&context(&cli.global)?)?);
            Ok(())
        }
        Command::Gan(GanCommand::Train) => print_json(&pipeline::gan_train(&context(&cli.global)?)?),
        Command::Gan(GanCommand::AblateOrder) => print_json(&pipeline::gan_ablate_order(&context(&cli.global)?)?),
        Command::Gan(GanCommand::Styles { count }) => {
            show_path(&pipeline::gan_styles(&context(&cli.global)?, count)?);
            Ok(())
        }
        Command::Augment => print_json(&pipeline::augment(&context(&cli.global)?)?),
        Command::Train => {
            show_path(&pipeline::train(&context(&cli.global)?)?);
            Ok(())
        }
        Command::Evaluate => print_json(&pipeline::evaluate(&context(&cli.global)?)?),
        Command::Cv => {
            let report = pipeline::cv(&context(&cli.global)?)?;
            print!("{}", csda_core::evalkit::render_markdown(&report));
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CsdaError>() {
        Some(e) if e.is_config() => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
