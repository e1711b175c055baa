use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use clues_cli::commands::{self, AnalyzeArgs};
use clues_cli::config::TEMPLATE;
use clues_cli::{exit, exit_code, BackendKind, CliError, Overrides, RunConfig};

/// Survey agents for macroeconomic-shock vignettes.
#[derive(Debug, Parser)]
#[command(name = "clues", version, about)]
struct Cli {
    /// Run configuration file.
    #[arg(long, short, global = true, default_value = "clues.toml")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured chat backend.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Overrides the configured number of repeats.
    #[arg(long, global = true)]
    repeats: Option<u32>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the agent populations and knowledge indexes.
    Construct,
    /// Run the experiment with the configured agents.
    Run,
    /// Turn a records file into a report bundle.
    Analyze {
        /// Records file; the configured run's records when omitted.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Report label; the run directory name when omitted.
        #[arg(long)]
        label: Option<String>,
        /// Vignette directory the records were produced with.
        #[arg(long)]
        vignettes: Option<PathBuf>,
        /// Bundle directory; reports/<label> below the output directory when
        /// omitted.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Re-run with each agent component removed and compare with the full
    /// agents.
    Ablate,
    /// Run and analyze a custom vignette set.
    Preestimate {
        /// Directory with one sub-directory per vignette.
        #[arg(long)]
        vignettes: PathBuf,
    },
    /// Check the configuration and the assets it references.
    ValidateConfig,
    /// Write the bundled templates, vignettes and coding prompts for editing.
    ExportAssets {
        dir: PathBuf,
    },
    /// Write an annotated configuration file.
    InitConfig {
        path: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.apply(&Overrides { seed: cli.seed, backend: cli.backend, repeats: cli.repeats, output: cli.out.clone() });
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Construct => {
            let report = commands::construct(&load(cli)?)?;
            print!("{}", report.render());
        }
        Command::Run => {
            let status = commands::run(&load(cli)?)?;
            println!("{}", status.render());
        }
        Command::Analyze { results, label, vignettes, bundle } => {
            let args = AnalyzeArgs {
                results: results.clone(),
                label: label.clone(),
                vignettes: vignettes.clone(),
                bundle: bundle.clone(),
            };
            let (report, dir) = commands::analyze_results(&load(cli)?, &args)?;
            print!("{}", report.direction.render(&report.vignettes()));
            println!("report bundle written to {}", dir.display());
        }
        Command::Ablate => {
            for s in commands::ablate(&load(cli)?)? {
                println!("{}: {}", s.slug, s.status.render());
                print!("{}", s.rendered);
            }
        }
        Command::Preestimate { vignettes } => {
            let (status, dir) = commands::preestimate(&load(cli)?, vignettes)?;
            println!("{}", status.render());
            println!("report bundle written to {}", dir.display());
        }
        Command::ValidateConfig => println!("{}", commands::validate_config(&load(cli)?)?),
        Command::ExportAssets { dir } => {
            clues_core::assets::export(dir).with_context(|| format!("exporting assets to {}", dir.display()))?;
            println!("assets written to {}", dir.display());
        }
        Command::InitConfig { path } => {
            if path.exists() {
                return Err(CliError::Usage(format!("{} already exists", path.display())).into());
            }
            std::fs::write(path, TEMPLATE).with_context(|| format!("writing {}", path.display()))?;
            println!("configuration written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
