mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spde_lab_core::experiment::{self, Experiment, ExperimentConfig, RunOutput};

use crate::config::{resolve, Overrides, SEED_ENV};

#[derive(Parser)]
#[command(name = "spde-lab", version, about = "Monte Carlo checks of closed-form SPDE statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Q-Wiener process: trace and bilinear covariance identities
    Wiener(RunArgs),
    /// Stochastic wave equation: moments and energy
    Wave(RunArgs),
    /// Heat equation with multiplicative scalar noise
    Heat(RunArgs),
    /// Lyapunov exponents of a linear parabolic equation
    Lyapunov(RunArgs),
    /// Stochastic Burgers equation: energy and exit bounds
    Burgers(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    values: Overrides,
}

const EXIT_STATISTICAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (experiment, args) = match cli.command {
        Command::Wiener(a) => (Experiment::Wiener, a),
        Command::Wave(a) => (Experiment::Wave, a),
        Command::Heat(a) => (Experiment::Heat, a),
        Command::Lyapunov(a) => (Experiment::Lyapunov, a),
        Command::Burgers(a) => (Experiment::Burgers, a),
    };
    let resolved = match resolve(experiment, args.values, args.config.as_deref(), std::env::var(SEED_ENV).ok()) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let output = match experiment::run(&resolved.config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_STATISTICAL);
        }
    };
    if let Err(e) = write_outputs(&resolved.out, &resolved.config, &output) {
        eprintln!("error: writing {}: {e}", resolved.out.display());
        return ExitCode::from(EXIT_STATISTICAL);
    }
    print_summary(&resolved.out, &output);
    if output.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_STATISTICAL)
    }
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, output: &RunOutput) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), output.report.to_csv())?;
    for series in &output.series {
        fs::write(dir.join(series.file_name()), series.to_csv())?;
    }
    let summary = serde_json::to_string_pretty(&output.summary(config)).map_err(std::io::Error::other)?;
    fs::write(dir.join("summary.json"), summary + "\n")?;
    let toml = toml::to_string(config).map_err(std::io::Error::other)?;
    fs::write(dir.join("config.toml"), toml)
}

fn print_summary(dir: &Path, output: &RunOutput) {
    for row in &output.report.rows {
        let mark = if row.pass { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<32} t={:<8.4} closed={:<14.6e} mc={:<14.6e} z={:+.2}",
            row.label, row.t, row.closed_form, row.mc_mean, row.z
        );
    }
    for note in &output.notes {
        println!("note: {note}");
    }
    println!(
        "{} passed, {} failed; outputs in {}",
        output.report.passed(),
        output.report.failed(),
        dir.display()
    );
}
