//! Drive the whole harness from a plan, as the `ridehail` binary does.

use ridehail::harness::{run_stages, ExperimentPlan, RunOptions, Stage};

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("ridehail-example-plan");
    let plan = ExperimentPlan::from_toml(&format!(
        r#"
schema_version = 1
output_dir = "{}"
policies = ["relocation-only", "mpc-heuristic", "mpc-clustered", "proxy"]
merge_map = [0, 1, 2, 0, 1, 2]

[generate]
perturbations = 2

[train]
learner = "forest"

[[scenarios]]
name = "hub"
pattern = "hub-and-spoke"
train_seeds = "100..110"
eval_seeds = "0..5"
config = {{ zone_spacing_seconds = 600.0 }}
"#,
        dir.display()
    ))?;
    for o in run_stages(&plan, &Stage::ALL, &RunOptions::default())? {
        println!("{:<9} {:<6} {}", o.stage.name(), if o.skipped { "skip" } else { "ran" }, o.detail);
    }
    println!();
    print!("{}", std::fs::read_to_string(dir.join("hub/validation.csv"))?);
    println!();
    for line in std::fs::read_to_string(dir.join("report.csv"))?.lines().filter(|l| l.starts_with("scenario") || l.contains(",served,")) {
        println!("{line}");
    }
    println!("\noutputs in {}", dir.display());
    Ok(())
}
