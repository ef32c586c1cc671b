mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;

use conelab_core::thresholds::Check;

use crate::output::OutputDir;
use crate::settings::{RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "conelab", version, about = "Verification runs for Camassa-Holm cone embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with the same keys as the flags; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate CH and check conserved quantities
    ChRun,
    /// Integrate the two-component system and check conserved quantities
    Ch2Run,
    /// Integrate the peakon ODE
    PeakonRun,
    /// Divergence, pressure consistency and finite-difference checks of the cone lift
    VerifyEmbedding,
    /// Residual of the lifted two-component equation
    VerifyCh2Lift,
    /// Curl of the lifted field and advection of its vorticity
    VerifyVorticity,
    /// Compare potential motion with projected warped geodesics
    Eisenhart,
    /// Sample sectional curvatures of a lift metric
    CurvatureScan,
    /// Peakon-antipeakon collision and lifted curves
    Figure1,
    /// Residual tables over resolutions and time steps
    Sweep,
    /// Every suite, one subdirectory each
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ChRun => "ch-run",
            Command::Ch2Run => "ch2-run",
            Command::PeakonRun => "peakon-run",
            Command::VerifyEmbedding => "verify-embedding",
            Command::VerifyCh2Lift => "verify-ch2-lift",
            Command::VerifyVorticity => "verify-vorticity",
            Command::Eisenhart => "eisenhart",
            Command::CurvatureScan => "curvature-scan",
            Command::Figure1 => "figure1",
            Command::Sweep => "sweep",
            Command::All => "all",
        }
    }
}

const SUITES: [Command; 10] = [
    Command::ChRun,
    Command::Ch2Run,
    Command::PeakonRun,
    Command::VerifyEmbedding,
    Command::VerifyCh2Lift,
    Command::VerifyVorticity,
    Command::Eisenhart,
    Command::CurvatureScan,
    Command::Figure1,
    Command::Sweep,
];

#[derive(Serialize)]
struct SuiteSummary {
    command: &'static str,
    passed: bool,
    checks: Vec<Check>,
}

#[derive(Serialize)]
struct Summary {
    passed: bool,
    suites: Vec<SuiteSummary>,
}

fn print_checks(command: Command, checks: &[Check]) {
    for c in checks {
        let op = if c.upper_bound { "<=" } else { ">=" };
        println!(
            "{} {:<16} {:<30} {:.3e} {op} {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            command.name(),
            c.name,
            c.value,
            c.threshold
        );
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let base = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let settings = cli.settings.over(base);
    if cli.command != Command::All {
        let cfg = RunConfig::resolve(cli.command, &settings)?;
        let (passed, checks) = commands::run(cli.command, &cfg)?;
        print_checks(cli.command, &checks);
        return Ok(passed);
    }
    let root = RunConfig::resolve(Command::All, &settings)?.out;
    let mut suites = Vec::new();
    for command in SUITES {
        let mut cfg = RunConfig::resolve(command, &settings)?;
        cfg.out = root.join(command.name());
        let (passed, checks) = commands::run(command, &cfg)?;
        print_checks(command, &checks);
        suites.push(SuiteSummary { command: command.name(), passed, checks });
    }
    let passed = suites.iter().all(|s| s.passed);
    OutputDir::create(&root)?.json("report.json", &Summary { passed, suites })?;
    Ok(passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
