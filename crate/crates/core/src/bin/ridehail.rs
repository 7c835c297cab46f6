use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use ridehail::harness::{run_stages, ExperimentPlan, HarnessError, RunOptions, SeedRange, Stage};

/// Experiment harness for the pricing and relocation policies.
#[derive(Parser)]
#[command(name = "ridehail", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write base and perturbed request streams plus a manifest.
    Generate(Flags),
    /// Drive the labelling MPC over training streams and store the labelled instances.
    Solve(Flags),
    /// Fit the pricing and relocation learners and write the validation table.
    Train(Flags),
    /// Simulate every policy on every evaluation seed.
    Evaluate(Flags),
    /// Summarize metrics with means and 95% confidence intervals.
    Report(Flags),
    /// Run the stages listed in the plan, in order.
    Run(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// Experiment plan (TOML).
    #[arg(long)]
    plan: PathBuf,
    /// Evaluation seeds as start..end, overriding the plan.
    #[arg(long)]
    seed_range: Option<SeedRange>,
    /// Re-run stages that are already up to date.
    #[arg(long)]
    force: bool,
    /// Write each solved instance as an LP file during solve.
    #[arg(long)]
    export_mip: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Wall-clock cap per solver call, in seconds. Makes results machine-dependent.
    #[arg(long, value_name = "SECONDS")]
    wall_clock: Option<f64>,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let (flags, stage) = match cli.command {
        Command::Generate(f) => (f, Some(Stage::Generate)),
        Command::Solve(f) => (f, Some(Stage::Solve)),
        Command::Train(f) => (f, Some(Stage::Train)),
        Command::Evaluate(f) => (f, Some(Stage::Evaluate)),
        Command::Report(f) => (f, Some(Stage::Report)),
        Command::Run(f) => (f, None),
    };
    let plan = ExperimentPlan::load(&flags.plan)?;
    let wall_clock = match flags.wall_clock {
        Some(s) if !(s.is_finite() && s > 0.0) => return Err(HarnessError::Plan("--wall-clock must be positive".into())),
        s => s.map(Duration::from_secs_f64),
    };
    let opts = RunOptions {
        force: flags.force,
        export_mip: flags.export_mip,
        jobs: flags.jobs,
        seed_range: flags.seed_range,
        wall_clock,
    };
    let stages = stage.map_or_else(|| plan.stages.clone(), |s| vec![s]);
    for o in run_stages(&plan, &stages, &opts)? {
        let scope = o.scenario.as_deref().unwrap_or("all");
        let state = if o.skipped { "skipped" } else { "done" };
        println!("{:<9} {scope:<16} {state:<8} {}", o.stage.name(), o.detail);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
