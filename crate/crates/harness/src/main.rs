use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use etlab::{execute, exit_code, load_config, Experiment, ExperimentReport, HarnessError, Mode};

/// Batch runner for the electrothermal laboratory experiments.
#[derive(Parser)]
#[command(name = "etlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a config file.
    Run {
        config: PathBuf,
        /// `key=value`, applied after the file; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the experiment catalog.
    ListExperiments,
    /// Run an experiment and record its regression values as baselines.
    FreezeBaselines {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn print_report(r: &ExperimentReport) {
    for c in &r.checks {
        println!(
            "{} {}: {:.6e} ({})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold.describe()
        );
    }
    println!(
        "{}: {} in {:.1} s",
        r.experiment,
        if r.pass { "pass" } else { "FAIL" },
        r.wall_time_s
    );
}

fn run(config: PathBuf, overrides: &[String], mode: Mode) -> ExitCode {
    let result: Result<ExperimentReport, HarnessError> =
        load_config(&config, overrides).and_then(|cfg| execute(&cfg, mode));
    match &result {
        Ok(r) => print_report(r),
        Err(e) => eprintln!("etlab: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, overrides } => run(config, &overrides, Mode::Run),
        Command::FreezeBaselines { config, overrides } => run(config, &overrides, Mode::Freeze),
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{}  {}", e.id(), e.title());
            }
            ExitCode::SUCCESS
        }
    }
}
