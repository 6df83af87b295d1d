use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gigsim::experiment::ResultTable;
use gigsim::export::{self, RESULTS_FILE, SERIES_FILE};
use gigsim::metrics::benchmark_compare;
use gigsim::RunSummary;
use serde_json::{json, Map, Value};

use crate::commands::{finish, input_config, pretty, read_optional, DISTRIBUTION_FILE, SUMMARY_FILE};

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), export::fmt_num)
}

/// CSV text as a markdown table.
fn md_table(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else { return String::new() };
    let cols = header.split(',').count();
    let mut out = format!("| {} |\n|{}\n", header.replace(',', " | "), " --- |".repeat(cols));
    for l in lines {
        out.push_str(&format!("| {} |\n", l.replace(',', " | ")));
    }
    out
}

/// Per-day median of the runs' day-end index, skipping undefined days.
fn median_daily_index(table: &ResultTable) -> Vec<Option<f64>> {
    let days = table.rows.iter().map(|r| r.daily_index.len()).max().unwrap_or(0);
    (0..days)
        .map(|d| median(table.rows.iter().filter_map(|r| r.daily_index.get(d).copied().flatten()).collect()))
        .collect()
}

fn read_benchmark(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == "real")
        .with_context(|| format!("{} has no 'real' column", path.display()))?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            rec[col].trim().parse::<f64>().with_context(|| format!("bad value '{}' in {}", &rec[col], path.display()))
        })
        .collect()
}

pub fn report(input: &Path, out: &Path, benchmark: Option<&Path>) -> Result<()> {
    let started = Instant::now();
    let cfg = input_config(input)?;
    let mut md = String::from("# gigsim report\n\n");
    let mut body = Map::new();
    let mut simulated: Option<Vec<Option<f64>>> = None;

    if let Some(text) = read_optional(input, SUMMARY_FILE)? {
        let s: RunSummary = serde_json::from_str(&text).context("parsing summary.json")?;
        md.push_str(&format!(
            "## Single run\n\nseed {}, {} riders, {} steps\n\n- involution index: {}\n- mean utility: {}\n- risk-avoidant share at the end: {}\n- orders created / delivered / expired: {} / {} / {}\n\n",
            s.seed,
            s.n_riders,
            s.horizon,
            fmt_opt(s.involution_index),
            export::fmt_num(s.mean_utility),
            export::fmt_num(s.frac_risk_avoidant),
            s.orders_created,
            s.orders_delivered,
            s.orders_expired
        ));
        body.insert(
            "run".into(),
            json!({ "seed": s.seed, "involution_index": s.involution_index, "mean_utility": s.mean_utility,
                    "frac_risk_avoidant": s.frac_risk_avoidant, "daily_index": s.daily_index }),
        );
        simulated = Some(s.daily_index);
    }

    if let Some(results) = read_optional(input, RESULTS_FILE)? {
        let series = read_optional(input, SERIES_FILE)?;
        let table = export::read_results(&results, series.as_deref())?;
        let points = table.rows.iter().map(|r| r.point).max().map_or(0, |p| p + 1);
        md.push_str(
            "## Experiment\n\n| design point | levels | runs | median involution index |\n| --- | --- | --- | --- |\n",
        );
        let mut per_point = Vec::new();
        for p in 0..points {
            let rows: Vec<_> = table.rows.iter().filter(|r| r.point == p).collect();
            let Some(first) = rows.first() else { continue };
            let levels: Vec<String> =
                table.factors.iter().zip(&first.levels).map(|(f, l)| format!("{f}={l}")).collect();
            let med = median(rows.iter().map(|r| r.involution_index).filter(|x| x.is_finite()).collect());
            md.push_str(&format!("| {p} | {} | {} | {} |\n", levels.join(" "), rows.len(), fmt_opt(med)));
            per_point.push(json!({ "design_point": p, "levels": levels, "runs": rows.len(), "median_index": med }));
        }
        md.push('\n');
        body.insert("experiment".into(), Value::Array(per_point));
        if series.is_some() && simulated.is_none() {
            simulated = Some(median_daily_index(&table));
        }
    }

    if let Some(text) = read_optional(input, DISTRIBUTION_FILE)? {
        let d: Value = serde_json::from_str(&text).context("parsing distribution.json")?;
        md.push_str(&format!(
            "## Involution levels\n\ncounts {}, undefined {}, fraction_high {}\n\n",
            d["counts"], d["undefined"], d["fraction_high"]
        ));
        body.insert("distribution".into(), d);
    }

    for (file, title) in [
        ("coefficients.csv", "Standardized path coefficients"),
        ("ate.csv", "Treatment effects (highest vs lowest level)"),
        ("shares.csv", "Intention shares per window"),
        ("flows.csv", "Intention flows between windows"),
    ] {
        if let Some(text) = read_optional(input, file)? {
            md.push_str(&format!("## {title}\n\n{}\n", md_table(&text)));
            body.insert(file.trim_end_matches(".csv").into(), Value::String(text));
        }
    }

    let mut files = Vec::new();
    if let Some(path) = benchmark {
        let real = read_benchmark(path)?;
        let Some(sim) = simulated else {
            bail!("benchmark needs summary.json or results.csv with {SERIES_FILE} in {}", input.display())
        };
        let Some(sim) = sim.into_iter().collect::<Option<Vec<f64>>>() else {
            bail!("simulated day-end index is undefined on some day");
        };
        let c = benchmark_compare(&real, &sim)?;
        md.push_str(&format!(
            "## Benchmark\n\nMAE {}, RMSE {}, Pearson {}\n",
            export::fmt_num(c.mae),
            export::fmt_num(c.rmse),
            fmt_opt(c.pearson)
        ));
        println!(
            "benchmark: mae {} rmse {} pearson {}",
            export::fmt_num(c.mae),
            export::fmt_num(c.rmse),
            fmt_opt(c.pearson)
        );
        files.push((
            "benchmark.csv".to_string(),
            format!(
                "metric,value\nmae,{}\nrmse,{}\npearson,{}\n",
                export::fmt_num(c.mae),
                export::fmt_num(c.rmse),
                fmt_opt(c.pearson)
            ),
        ));
        body.insert("benchmark".into(), json!(c));
    }
    if body.is_empty() {
        bail!("nothing to report in {}", input.display());
    }
    files.push(("report.md".to_string(), md));
    files.push(("report.json".to_string(), pretty(&Value::Object(body))));
    finish(out, files, &cfg, None, started)
}
