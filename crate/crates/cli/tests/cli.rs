use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gigsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gigsim")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

const TINY: &str = "[world]\nn_riders = 12\nhorizon = 240\n\n[experiment]\nreplicates = 1\n";

#[test]
fn missing_config_is_a_usage_error() {
    let out = gigsim(&["simulate", "--out", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage") && err.contains("--config"), "{err}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(gigsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gigsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[world]\nn_riders = 10\n[metrics]\neta = -1.0\n");
    let out = gigsim(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("metrics.eta must be > 0"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = gigsim(&["simulate", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("sim");
    let out = gigsim(&["simulate", "--config", s(&cfg), "--seed", "4", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(out_dir.join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 240);
    assert!(trace.ends_with('\n'));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 3);
    let saved = gigsim::load_config(&out_dir.join("config.toml")).unwrap();
    assert_eq!(saved, gigsim::load_config(&cfg).unwrap());
    assert_eq!(manifest["config_hash"], saved.hash());
}

#[test]
fn one_point_experiment_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("exp");
    let out = gigsim(&["experiment", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "design_point,seed,involution_index,swf,mean_utility,frac_risk_avoidant");
}

#[test]
fn zero_parallelism_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = gigsim(&["experiment", "--config", s(&cfg), "--out", s(&dir.path().join("e")), "--parallel", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn observe_on_default_experiment_reports_fraction_high() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let exp = dir.path().join("exp");
    assert_eq!(gigsim(&["experiment", "--config", s(&root), "--out", s(&exp)]).status.code(), Some(0));
    let out = gigsim(&["analyze", "--in", s(&exp), "--layer", "observe", "--out", s(&dir.path().join("obs"))]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("10 runs") && stdout.contains("fraction_high"), "{stdout}");
    let d: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("obs/distribution.json")).unwrap()).unwrap();
    assert_eq!(d["runs"], 10);
}

#[test]
fn heatmaps_conserve_rider_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let sim = dir.path().join("sim");
    gigsim(&["simulate", "--config", s(&cfg), "--out", s(&sim)]);
    let obs = dir.path().join("obs");
    let out = gigsim(&["analyze", "--in", s(&sim), "--layer", "observe", "--out", s(&obs), "--window", "60"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..4 {
        let text = fs::read_to_string(obs.join(format!("heatmap_w{k}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 100);
        let total: u64 = text.lines().flat_map(|l| l.split(',')).map(|c| c.parse::<u64>().unwrap()).sum();
        assert_eq!(total, 12 * 60);
    }
    let bad = gigsim(&["analyze", "--in", s(&sim), "--layer", "observe", "--out", s(&obs), "--window", "7"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn mechanism_layer_writes_flow_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let sim = dir.path().join("sim");
    gigsim(&["simulate", "--config", s(&cfg), "--out", s(&sim)]);
    let mech = dir.path().join("mech");
    let out = gigsim(&["analyze", "--in", s(&sim), "--layer", "mechanism", "--out", s(&mech)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let flows = fs::read_to_string(mech.join("flows.csv")).unwrap();
    assert!(flows.starts_with("window,from,to,count\n"));
    // Every window boundary moves all 12 riders.
    let mut per_window = std::collections::BTreeMap::new();
    for l in flows.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        *per_window.entry(f[0].to_string()).or_insert(0u64) += f[3].parse::<u64>().unwrap();
    }
    assert_eq!(per_window.len(), 9);
    assert!(per_window.values().all(|&c| c == 12));
    for name in ["shares.csv", "correlations.csv", "clusters.csv", "manifest.json"] {
        assert!(mech.join(name).exists(), "{name}");
    }
}

#[test]
fn intervene_then_report_with_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[world]\nn_riders = 20\nhorizon = 360\n\n[experiment]\nreplicates = 3\n\n[[experiment.factors]]\nname = \"order_volume\"\nlevels = [0.5, 1.0]\n",
    );
    let exp = dir.path().join("exp");
    assert_eq!(gigsim(&["experiment", "--config", s(&cfg), "--out", s(&exp)]).status.code(), Some(0));
    let out = gigsim(&["analyze", "--in", s(&exp), "--layer", "intervene", "--out", s(&exp)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let coeffs = fs::read_to_string(exp.join("coefficients.csv")).unwrap();
    assert!(coeffs.starts_with("factor,beta,p\norder_volume,"));
    assert!(fs::read_to_string(exp.join("ate.csv")).unwrap().lines().count() == 2);

    let bench = dir.path().join("real.csv");
    fs::write(&bench, "day,real\n0,10\n1,11\n2,12\n").unwrap();
    let rep = dir.path().join("rep");
    let out = gigsim(&["report", "--in", s(&exp), "--out", s(&rep), "--benchmark", s(&bench)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let b = fs::read_to_string(rep.join("benchmark.csv")).unwrap();
    assert!(b.starts_with("metric,value\nmae,"));
    let md = fs::read_to_string(rep.join("report.md")).unwrap();
    assert!(md.contains("## Experiment") && md.contains("## Benchmark"));

    fs::write(&bench, "day,real\n0,10\n1,11\n").unwrap();
    let out = gigsim(&["report", "--in", s(&exp), "--out", s(&rep), "--benchmark", s(&bench)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn log_level_is_read_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = Command::new(env!("CARGO_BIN_EXE_gigsim"))
        .args(["experiment", "--config", s(&cfg), "--out", s(&dir.path().join("e")), "--parallel", "1"])
        .env("SIM_LOG_LEVEL", "debug")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("finished design row"));
}
