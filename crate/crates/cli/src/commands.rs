use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gigsim::analysis::{
    cluster_intentions, density_heatmap, detect_anomalies, intention_behavior_correlation, involution_distribution,
    path_coefficients, stage_flow_matrix, IntentionLog, DEFAULT_ROBUST_Z,
};
use gigsim::experiment::{ate, build_design, execute_design, fit_metamodel, ResultTable, DEFAULT_BOOTSTRAP};
use gigsim::export::{self, RunManifest, RESULTS_FILE, SERIES_FILE};
use gigsim::metrics::InvolutionLevel;
use gigsim::{load_config, RunConfig};
use serde::Serialize;
use serde_json::json;

use crate::Layer;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DISTRIBUTION_FILE: &str = "distribution.json";

pub fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

pub fn read_optional(dir: &Path, name: &str) -> Result<Option<String>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    std::fs::read_to_string(&path).map(Some).with_context(|| format!("reading {}", path.display()))
}

/// The config saved next to a run's outputs, or the defaults when there is none.
pub fn input_config(dir: &Path) -> Result<RunConfig> {
    match read_optional(dir, CONFIG_FILE)? {
        Some(text) => RunConfig::from_toml_str(&text).with_context(|| format!("{}/{CONFIG_FILE}", dir.display())),
        None => Ok(RunConfig::default()),
    }
}

pub fn finish(
    out: &Path,
    files: Vec<(String, String)>,
    config: &RunConfig,
    seed: Option<u64>,
    started: Instant,
) -> Result<()> {
    let names = export::write_artifacts(out, &files)?;
    RunManifest::new(config.hash(), seed, names, started.elapsed().as_secs_f64()).write(out)?;
    Ok(())
}

pub fn simulate(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let started = Instant::now();
    let cfg = load_config(config)?;
    let trace = gigsim::run(&cfg, seed)?;
    let s = &trace.summary;
    match s.involution_index {
        Some(x) => println!("seed {seed}: involution_index = {}", export::fmt_num(x)),
        None => println!("seed {seed}: involution_index undefined ({})", s.involution_note.as_deref().unwrap_or("")),
    }
    let files = vec![
        (TRACE_FILE.to_string(), export::trace_jsonl(&trace)),
        (CONFIG_FILE.to_string(), cfg.to_toml_string()),
        (SUMMARY_FILE.to_string(), pretty(s)),
    ];
    finish(out, files, &cfg, Some(seed), started)
}

pub fn experiment(config: &Path, out: &Path, parallel: Option<usize>) -> Result<()> {
    let started = Instant::now();
    let cfg = load_config(config)?;
    let e = &cfg.experiment;
    let design = build_design(&e.factors, e.replicates, e.base_seed)?;
    let threads = parallel.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        bail!("--parallel must be >= 1");
    }
    log::info!("running {} design rows on {threads} threads", design.rows.len());
    let table = execute_design(&design, &cfg, threads);
    let failed = table.rows.iter().filter(|r| !r.involution_index.is_finite()).count();
    println!("{} runs, {} with an undefined index", table.rows.len(), failed);
    let files = vec![
        (RESULTS_FILE.to_string(), export::results_csv(&table)),
        (SERIES_FILE.to_string(), export::series_csv(&table)),
        (CONFIG_FILE.to_string(), cfg.to_toml_string()),
    ];
    finish(out, files, &cfg, None, started)
}

fn results_table(dir: &Path) -> Result<Option<ResultTable>> {
    let Some(results) = read_optional(dir, RESULTS_FILE)? else { return Ok(None) };
    let series = read_optional(dir, SERIES_FILE)?;
    Ok(Some(export::read_results(&results, series.as_deref())?))
}

fn require_results(dir: &Path) -> Result<ResultTable> {
    results_table(dir)?.with_context(|| format!("no {RESULTS_FILE} in {}", dir.display()))
}

fn require_trace(dir: &Path) -> Result<gigsim::RunTrace> {
    let text = read_optional(dir, TRACE_FILE)?.with_context(|| format!("no {TRACE_FILE} in {}", dir.display()))?;
    Ok(export::read_trace_jsonl(&text)?)
}

pub fn analyze(input: &Path, layer: Layer, out: &Path, window: Option<u32>) -> Result<()> {
    let started = Instant::now();
    let cfg = input_config(input)?;
    let files = match layer {
        Layer::Observe => observe(input, &cfg, window)?,
        Layer::Intervene => intervene(input, &cfg)?,
        Layer::Mechanism => mechanism(input, &cfg, window)?,
    };
    finish(out, files, &cfg, None, started)
}

fn observe(input: &Path, cfg: &RunConfig, window: Option<u32>) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    let table = results_table(input)?;
    let has_trace = input.join(TRACE_FILE).exists();
    if table.is_none() && !has_trace {
        bail!("{} holds neither {RESULTS_FILE} nor {TRACE_FILE}", input.display());
    }
    if let Some(table) = table {
        let d = involution_distribution(&table)?;
        let anomalies = match detect_anomalies(&table, DEFAULT_ROBUST_Z) {
            Ok(rows) => rows,
            Err(e) => {
                log::warn!("anomaly detection skipped: {e}");
                Vec::new()
            }
        };
        let counts: serde_json::Map<String, serde_json::Value> =
            InvolutionLevel::ALL.iter().map(|l| (l.as_str().to_string(), json!(d.count(*l)))).collect();
        let flagged: Vec<_> = anomalies
            .iter()
            .map(|&i| {
                let r = &table.rows[i];
                json!({ "design_point": r.point, "seed": r.seed, "involution_index": r.involution_index })
            })
            .collect();
        println!(
            "{} runs: low {}, moderate {}, high {}, undefined {}; fraction_high = {}; {} anomalous",
            d.runs(),
            d.count(InvolutionLevel::Low),
            d.count(InvolutionLevel::Moderate),
            d.count(InvolutionLevel::High),
            d.undefined,
            export::fmt_num(d.fraction_high),
            flagged.len()
        );
        let body = json!({
            "runs": d.runs(),
            "counts": counts,
            "undefined": d.undefined,
            "fraction_high": d.fraction_high,
            "anomalies": flagged,
        });
        files.push((DISTRIBUTION_FILE.to_string(), pretty(&body)));
    }
    if has_trace {
        let trace = require_trace(input)?;
        let window = window.unwrap_or(cfg.world.steps_per_day);
        let h = density_heatmap(&trace, cfg.world.width, cfg.world.height, window)?;
        for k in 0..h.grids.len() {
            files.push((format!("heatmap_w{k}.csv"), export::heatmap_csv(&h, k)));
        }
        println!("{} heatmap windows of {window} steps", h.grids.len());
    }
    Ok(files)
}

/// Factors with numeric codes and at least two distinct levels.
fn usable_factors(table: &ResultTable) -> Vec<String> {
    table
        .factors
        .iter()
        .filter(|f| table.factor_codes(f).is_ok_and(|codes| codes.iter().any(|c| *c != codes[0])))
        .cloned()
        .collect()
}

fn intervene(input: &Path, cfg: &RunConfig) -> Result<Vec<(String, String)>> {
    let table = require_results(input)?;
    let factors = usable_factors(&table);
    if factors.is_empty() {
        bail!("no factor in {RESULTS_FILE} varies over numeric levels");
    }
    let response = "involution_index";
    let paths = path_coefficients(&table, response, &factors)?;
    for (f, b) in factors.iter().zip(&paths.beta) {
        println!("path {f} -> {response}: {}", export::fmt_num(*b));
    }
    let y = table.column(response)?;
    let mut ate_rows = String::from("factor,treated,control,n_treated,n_control,estimate,ci_low,ci_high\n");
    for f in &factors {
        let codes = table.factor_codes(f)?;
        let finite = |c: f64| -> Vec<f64> {
            codes.iter().zip(&y).filter(|(k, v)| **k == c && v.is_finite()).map(|(_, v)| *v).collect()
        };
        let hi = codes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = codes.iter().copied().fold(f64::INFINITY, f64::min);
        let (treated, control) = (finite(hi), finite(lo));
        match ate(&treated, &control, DEFAULT_BOOTSTRAP, cfg.experiment.base_seed) {
            Ok(a) => ate_rows.push_str(&format!(
                "{f},{},{},{},{},{},{},{}\n",
                export::fmt_num(hi),
                export::fmt_num(lo),
                treated.len(),
                control.len(),
                export::fmt_num(a.estimate),
                export::fmt_num(a.ci_low),
                export::fmt_num(a.ci_high)
            )),
            Err(e) => log::warn!("ATE for {f} skipped: {e}"),
        }
    }
    let keep: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_finite()).collect();
    let columns: Vec<Vec<f64>> = factors.iter().map(|f| table.factor_codes(f)).collect::<gigsim::Result<_>>()?;
    let x: Vec<Vec<f64>> = keep.iter().map(|&i| columns.iter().map(|c| c[i]).collect()).collect();
    let yk: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    let model = fit_metamodel(&x, &yk, 2).or_else(|e| {
        log::info!("quadratic metamodel unavailable ({e}); fitting a linear one");
        fit_metamodel(&x, &yk, 1)
    })?;
    println!("metamodel degree {} r2 = {}", model.degree, export::fmt_num(model.r2));
    Ok(vec![
        ("coefficients.csv".to_string(), export::coefficients_csv(&paths)),
        ("ate.csv".to_string(), ate_rows),
        ("metamodel.json".to_string(), pretty(&json!({ "factors": factors, "response": response, "model": model }))),
    ])
}

fn mechanism(input: &Path, cfg: &RunConfig, window: Option<u32>) -> Result<Vec<(String, String)>> {
    let trace = require_trace(input)?;
    let log = IntentionLog::from_trace(&trace);
    let horizon = log.horizon();
    let window = window.unwrap_or(if horizon.is_multiple_of(10) { horizon / 10 } else { cfg.world.steps_per_day });
    let flows = stage_flow_matrix(&log, window)?;
    let corr = intention_behavior_correlation(&log, window)?;
    let clusters = cluster_intentions(&log, window, 2..=6, cfg.experiment.base_seed)?;
    let last = flows.shares.last().expect("at least two windows");
    println!(
        "{} windows; final shares rule_following {}, anxious {}, risk_avoidant {}; {} clusters",
        flows.windows.len(),
        export::fmt_num(last[0]),
        export::fmt_num(last[1]),
        export::fmt_num(last[2]),
        clusters.k
    );
    Ok(vec![
        ("flows.csv".to_string(), export::flows_csv(&flows)),
        ("shares.csv".to_string(), export::shares_csv(&flows)),
        ("correlations.csv".to_string(), export::correlations_csv(&corr)),
        ("clusters.csv".to_string(), export::clusters_csv(&clusters)),
    ])
}
