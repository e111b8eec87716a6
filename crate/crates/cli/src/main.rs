//! `flock`: analyze, certify, simulate and verify flocking experiments
//! described by a JSON config.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use config::{CommandName, RunConfig};
use report::Report;

#[derive(Parser)]
#[command(
    name = "flock",
    version,
    about = "Alignment dynamics on weighted digraphs: structural analysis, \
             flocking certificates, ODE simulation and jump-process verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress the report on stdout (files are still written).
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Classify the interaction graph and compute structural constants.
    Analyze,
    /// Evaluate the flocking certificate of every applicable regime.
    Certify,
    /// Integrate the dynamics and export trajectory and summary CSVs.
    Simulate,
    /// Check the jump-process interpretation along a simulated run.
    Verify,
    /// Run analyze, certify, simulate and verify in sequence.
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("flock: {failures} verification failure(s); see the report");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("flock: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<usize> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("missing --config PATH"))?;
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("read {}", config_path.display()))?;
    let mut parsed: RunConfig = config::parse_config(&text)?;
    if let Some(seed) = cli.seed {
        parsed.seed = Some(seed);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| parsed.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("create output directory {}", out_dir.display()))?;

    let experiment = parsed.build()?;
    let sequence = command_sequence(cli.command, parsed.commands.as_deref());

    let mut report = Report::new();
    let mut trajectory = None;
    for step in &sequence {
        match step {
            CommandName::Analyze => commands::analyze(&experiment, &mut report),
            CommandName::Certify => commands::certify(&experiment, &mut report),
            CommandName::Simulate => {
                trajectory = Some(commands::simulate_cmd(&experiment, &out_dir, &mut report)?);
            }
            CommandName::Verify => {
                // Usable standalone: simulate silently when needed.
                if trajectory.is_none() {
                    trajectory = Some(commands::run_simulation(&experiment)?);
                }
                commands::verify_cmd(
                    &experiment,
                    trajectory.as_ref().unwrap(),
                    &out_dir,
                    &mut report,
                )?;
            }
        }
    }

    let text = report.to_text();
    fs::write(out_dir.join("report.txt"), &text).context("write report.txt")?;
    let json = serde_json::to_string_pretty(&report.to_json()).context("render report.json")?;
    fs::write(out_dir.join("report.json"), json).context("write report.json")?;
    if !cli.quiet {
        print!("{text}");
    }
    Ok(report.failures().len())
}

/// Canonical execution order; `all` honours the config's command list
/// when present.
fn command_sequence(command: Command, configured: Option<&[CommandName]>) -> Vec<CommandName> {
    let all = [
        CommandName::Analyze,
        CommandName::Certify,
        CommandName::Simulate,
        CommandName::Verify,
    ];
    match command {
        Command::Analyze => vec![CommandName::Analyze],
        Command::Certify => vec![CommandName::Certify],
        Command::Simulate => vec![CommandName::Simulate],
        Command::Verify => vec![CommandName::Verify],
        Command::All => match configured {
            Some(listed) => all.into_iter().filter(|c| listed.contains(c)).collect(),
            None => all.to_vec(),
        },
    }
}
