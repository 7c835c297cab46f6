use std::fs;
use std::path::Path;
use std::process::Command;

use ridehail::harness::{run_stages, ExperimentPlan, HarnessError, ManifestRow, RunOptions, RunStamp, Stage};
use ridehail::sim::read_metrics;

fn plan(dir: &Path, extra: &str) -> ExperimentPlan {
    let text = format!(
        r#"
schema_version = 1
output_dir = "{}"
policies = ["proxy", "mpc-exact"]

[solver]
exact_nodes = 2000

[generate]
perturbations = 1

[train]
learner = "forest"
settings = {{ forest = {{ trees = 5, max_depth = 6, min_leaf = 2, feature_fraction = 1.0 }} }}

[[scenarios]]
name = "small"
pattern = "hub-and-spoke"
train_seeds = "50..53"
eval_seeds = "0..3"
config = {{ episode_epochs = 6, horizon = 3, fleet_size = 12 }}
{extra}
"#,
        dir.join("out").display()
    );
    ExperimentPlan::from_toml(&text).unwrap()
}

fn manifest(dir: &Path) -> Vec<ManifestRow> {
    csv::Reader::from_path(dir.join("manifest.csv")).unwrap().deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn generate_counts_and_percentages() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = plan(tmp.path(), "");
    p.scenarios[0].train_seeds = "0..0".parse().unwrap();
    p.scenarios[0].eval_seeds = "0..10".parse().unwrap();
    p.policies = vec!["mpc-heuristic".parse().unwrap()];
    for (perturbations, files) in [(0, 10), (5, 60)] {
        p.generate.perturbations = perturbations;
        run_stages(&p, &[Stage::Generate], &RunOptions::default()).unwrap();
        let dir = p.output_dir.join("small");
        let rows = manifest(&dir);
        assert_eq!(rows.len(), files);
        assert_eq!(fs::read_dir(dir.join("streams")).unwrap().count(), files);
        assert!(rows.iter().all(|r| (-5.0..=5.0).contains(&r.pct)));
        assert!(rows.iter().filter(|r| r.variant == 0).all(|r| r.pct == 0.0));
        fs::remove_dir_all(dir.join("streams")).unwrap();
    }
}

#[test]
fn full_pipeline_pairs_seeds_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let p = plan(tmp.path(), "");
    let out = run_stages(&p, &Stage::ALL, &RunOptions { export_mip: true, ..Default::default() }).unwrap();
    assert_eq!(out.len(), 5);
    assert!(out.iter().all(|o| !o.skipped));
    let dir = p.output_dir.join("small");
    let metrics = fs::read(dir.join("metrics.csv")).unwrap();
    let rows = read_metrics(&metrics[..]).unwrap();
    let seeds = |policy: &str| rows.iter().filter(|r| r.policy == policy).map(|r| r.seed).collect::<Vec<_>>();
    assert_eq!(seeds("proxy"), vec![0, 1, 2]);
    assert_eq!(seeds("proxy"), seeds("mpc-exact"));
    assert!(rows.iter().all(|r| r.invariant_violations == 0 && r.is_balanced()));
    // 3 training seeds x 2 streams x 6 epochs
    assert_eq!(fs::read_dir(dir.join("mip")).unwrap().count(), 36);
    let paired = fs::read_to_string(p.output_dir.join("paired.csv")).unwrap();
    assert!(paired.lines().any(|l| l.starts_with("small,proxy,mpc-exact,served,3,")));

    // Everything needed to rerun is on disk.
    let stamp = RunStamp::load(&p.output_dir).unwrap();
    assert_eq!(stamp.plan, p);
    let cfg = ridehail::config::ScenarioConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(cfg, p.scenarios[0].config);

    let again = run_stages(&p, &Stage::ALL, &RunOptions::default()).unwrap();
    let rerun: Vec<Stage> = again.iter().filter(|o| !o.skipped).map(|o| o.stage).collect();
    assert_eq!(rerun, vec![Stage::Solve], "only the export flag changed");
    let again = run_stages(&p, &Stage::ALL, &RunOptions::default()).unwrap();
    assert!(again.iter().all(|o| o.skipped));
    let forced = run_stages(&p, &[Stage::Evaluate], &RunOptions { force: true, jobs: Some(1), ..Default::default() }).unwrap();
    assert!(!forced[0].skipped);
    assert_eq!(fs::read(dir.join("metrics.csv")).unwrap(), metrics);
}

#[test]
fn later_stages_name_what_is_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let p = plan(tmp.path(), "");
    let err = run_stages(&p, &[Stage::Evaluate], &RunOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("manifest.csv"), "{err}");
    run_stages(&p, &[Stage::Generate], &RunOptions::default()).unwrap();
    let err = run_stages(&p, &[Stage::Evaluate], &RunOptions::default()).unwrap_err();
    assert!(matches!(&err, HarnessError::Missing { stage: Stage::Train, .. }), "{err}");
    assert!(err.to_string().contains("pricing.json"));
    let err = run_stages(&p, &[Stage::Train], &RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("training_set.json"));
}

#[test]
fn report_refuses_empty_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let p = plan(tmp.path(), "");
    let dir = p.output_dir.join("small");
    fs::create_dir_all(&dir).unwrap();
    let err = run_stages(&p, &[Stage::Report], &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::Missing { stage: Stage::Evaluate, .. }));
    fs::write(dir.join("metrics.csv"), "").unwrap();
    let err = run_stages(&p, &[Stage::Report], &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::Empty { .. }));
    assert_eq!(err.exit_code(), 3);
    assert!(!p.output_dir.join("report.csv").exists());
}

#[test]
fn seed_range_overrides_evaluation_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = plan(tmp.path(), "");
    p.policies = vec!["none".parse().unwrap()];
    let opts = RunOptions { seed_range: Some("7..9".parse().unwrap()), ..Default::default() };
    run_stages(&p, &[Stage::Generate, Stage::Evaluate], &opts).unwrap();
    let rows = read_metrics(fs::File::open(p.output_dir.join("small/metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![7, 8]);
    assert_eq!(RunStamp::load(&p.output_dir).unwrap().plan.scenarios[0].eval_seeds, "7..9".parse().unwrap());
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ridehail");
    let good = tmp.path().join("plan.toml");
    fs::write(
        &good,
        r#"
schema_version = 1
output_dir = "out"
policies = ["none", "relocation-only"]
stages = ["generate", "evaluate", "report"]

[[scenarios]]
name = "tiny"
pattern = "uniform"
eval_seeds = "0..2"
config = { episode_epochs = 4, horizon = 3 }
"#,
    )
    .unwrap();
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let plan = good.to_str().unwrap();

    let missing = status(&["report", "--plan", plan]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("metrics.csv"));

    let ok = status(&["run", "--plan", plan, "--jobs", "2"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(tmp.path().join("out/report.csv").exists());
    let rerun = status(&["evaluate", "--plan", plan]);
    assert!(String::from_utf8_lossy(&rerun.stdout).contains("skipped"));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, fs::read_to_string(&good).unwrap().replace("\"uniform\"", "\"nowhere\"")).unwrap();
    assert_eq!(status(&["generate", "--plan", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(status(&["generate", "--plan", "/nonexistent/plan.toml"]).status.code(), Some(2));
    assert_eq!(status(&["generate", "--plan", plan, "--seed-range", "5..1"]).status.code(), Some(2));
}
