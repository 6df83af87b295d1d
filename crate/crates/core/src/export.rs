//! Byte-deterministic artifact writers and the matching readers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::IntentionLabel;
use crate::analysis::{Clustering, CorrelationMatrix, FlowMatrix, Heatmap, PathCoefficients};
use crate::error::{Error, Result};
use crate::experiment::{Level, ResultRow, ResultTable};
use crate::grid::Cell;
use crate::sim::{Behavior, RiderStep, RunSummary, RunTrace, StepRecord};

/// Formats with 9 significant digits, in the shortest of fixed or exponent
/// notation (the C `%.9g` rule).
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".into(), fmt_num)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// One flat JSON object per step. Riders are `[behavior, intention, x, y, income, cost]`.
pub fn trace_jsonl(trace: &RunTrace) -> String {
    let mut out = String::new();
    for rec in &trace.steps {
        let assigned: Vec<String> = rec.assigned.iter().map(|(o, r)| format!("[{o},{r}]")).collect();
        let riders: Vec<String> = rec
            .riders
            .iter()
            .map(|r| {
                format!(
                    "[\"{}\",\"{}\",{},{},{},{}]",
                    r.behavior.code(),
                    r.intention.code(),
                    r.position.x,
                    r.position.y,
                    fmt_num(r.income),
                    fmt_num(r.cost)
                )
            })
            .collect();
        out.push_str(&format!(
            "{{\"step\":{},\"created\":[{}],\"assigned\":[{}],\"delivered\":[{}],\"expired\":[{}],\"riders\":[{}]}}\n",
            rec.step,
            join_ids(&rec.created),
            assigned.join(","),
            join_ids(&rec.delivered),
            join_ids(&rec.expired),
            riders.join(",")
        ));
    }
    out
}

fn parse_err(line: usize, what: &str) -> Error {
    Error::Parse(format!("trace line {line}: {what}"))
}

fn ids(v: &Value, line: usize, key: &str) -> Result<Vec<usize>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err(line, &format!("missing '{key}'")))?
        .iter()
        .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| parse_err(line, &format!("bad id in '{key}'"))))
        .collect()
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64().or_else(|| v.as_str().and_then(|s| s.parse().ok()))
}

/// Reads step records back; the summary is left empty.
pub fn read_trace_jsonl(text: &str) -> Result<RunTrace> {
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line_no = i + 1;
        let v: Value = serde_json::from_str(line).map_err(|e| parse_err(line_no, &e.to_string()))?;
        let step = v.get("step").and_then(Value::as_u64).ok_or_else(|| parse_err(line_no, "missing 'step'"))? as u32;
        let assigned = v
            .get("assigned")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(line_no, "missing 'assigned'"))?
            .iter()
            .map(|p| match p.as_array().map(Vec::as_slice) {
                Some([o, r]) => Ok((
                    o.as_u64().ok_or_else(|| parse_err(line_no, "bad order id"))? as usize,
                    r.as_u64().ok_or_else(|| parse_err(line_no, "bad rider id"))? as usize,
                )),
                _ => Err(parse_err(line_no, "bad assignment pair")),
            })
            .collect::<Result<_>>()?;
        let riders = v
            .get("riders")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(line_no, "missing 'riders'"))?
            .iter()
            .map(|r| {
                let bad = || parse_err(line_no, "bad rider record");
                let f = r.as_array().filter(|a| a.len() == 6).ok_or_else(bad)?;
                Ok(RiderStep {
                    behavior: f[0].as_str().and_then(Behavior::from_code).ok_or_else(bad)?,
                    intention: f[1].as_str().and_then(IntentionLabel::from_code).ok_or_else(bad)?,
                    position: Cell::new(f[2].as_u64().ok_or_else(bad)? as u32, f[3].as_u64().ok_or_else(bad)? as u32),
                    income: num(&f[4]).ok_or_else(bad)?,
                    cost: num(&f[5]).ok_or_else(bad)?,
                })
            })
            .collect::<Result<_>>()?;
        steps.push(StepRecord {
            step,
            created: ids(&v, line_no, "created")?,
            assigned,
            delivered: ids(&v, line_no, "delivered")?,
            expired: ids(&v, line_no, "expired")?,
            riders,
        });
    }
    let summary = RunSummary {
        n_riders: steps.first().map_or(0, |s| s.riders.len()),
        horizon: steps.len() as u32,
        ..Default::default()
    };
    Ok(RunTrace { steps, summary })
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SERIES_FILE: &str = "index_series.csv";

pub fn results_csv(table: &ResultTable) -> String {
    let mut header = strings(&["design_point", "seed"]);
    header.extend(table.factors.iter().map(|f| format!("factor_{f}")));
    header.extend(strings(&["involution_index", "swf", "mean_utility", "frac_risk_avoidant"]));
    let rows = table.rows.iter().map(|r| {
        let mut row = vec![r.point.to_string(), r.seed.to_string()];
        row.extend(r.levels.iter().map(Level::to_string));
        row.extend([r.involution_index, r.swf, r.mean_utility, r.frac_risk_avoidant].map(fmt_num));
        row
    });
    csv_text(&header, rows)
}

/// Per-run day-end series: involution index and effective hours.
pub fn series_csv(table: &ResultTable) -> String {
    let header = strings(&["design_point", "seed", "day", "involution_index", "effective_hours"]);
    let rows = table.rows.iter().flat_map(|r| {
        let days = r.daily_index.len().max(r.daily_effective_hours.len());
        (0..days).map(move |d| {
            vec![
                r.point.to_string(),
                r.seed.to_string(),
                d.to_string(),
                opt_num(r.daily_index.get(d).copied().flatten()),
                opt_num(r.daily_effective_hours.get(d).copied()),
            ]
        })
    });
    csv_text(&header, rows)
}

fn parse_level(s: &str) -> Level {
    s.parse::<f64>().map_or_else(|_| Level::Label(s.to_string()), Level::Number)
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("{what}: not a number: '{s}'")))
}

/// Reads a results table and, when given, its day-end series.
pub fn read_results(results: &str, series: Option<&str>) -> Result<ResultTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(results.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let tail = ["involution_index", "swf", "mean_utility", "frac_risk_avoidant"];
    if cols.len() < 6 || cols[..2] != ["design_point", "seed"] || cols[cols.len() - 4..] != tail {
        return Err(Error::Parse(format!("unexpected results header: {}", cols.join(","))));
    }
    let factors: Vec<String> = cols[2..cols.len() - 4]
        .iter()
        .map(|c| c.strip_prefix("factor_").map(str::to_string).ok_or_else(|| Error::Parse(format!("bad column '{c}'"))))
        .collect::<Result<_>>()?;
    let nf = factors.len();
    let mut rows = Vec::new();
    let mut replicate_of: std::collections::HashMap<usize, u32> = Default::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let point = rec[0].parse().map_err(|_| Error::Parse(format!("bad design_point '{}'", &rec[0])))?;
        let rep = replicate_of.entry(point).or_default();
        let m = |k: usize| parse_num(&rec[2 + nf + k], tail[k]);
        rows.push(ResultRow {
            point,
            replicate: *rep,
            seed: rec[1].parse().map_err(|_| Error::Parse(format!("bad seed '{}'", &rec[1])))?,
            levels: (0..nf).map(|j| parse_level(&rec[2 + j])).collect(),
            involution_index: m(0)?,
            swf: m(1)?,
            mean_utility: m(2)?,
            frac_risk_avoidant: m(3)?,
            daily_index: Vec::new(),
            daily_effective_hours: Vec::new(),
            error: None,
        });
        *rep += 1;
    }
    if let Some(series) = series {
        let mut rdr = csv::ReaderBuilder::new().from_reader(series.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let point: usize = rec[0].parse().map_err(|_| Error::Parse("bad series design_point".into()))?;
            let seed: u64 = rec[1].parse().map_err(|_| Error::Parse("bad series seed".into()))?;
            let row = rows
                .iter_mut()
                .find(|r| r.point == point && r.seed == seed)
                .ok_or_else(|| Error::Parse(format!("series row for unknown run ({point}, {seed})")))?;
            let idx = parse_num(&rec[3], "involution_index")?;
            row.daily_index.push(idx.is_finite().then_some(idx));
            row.daily_effective_hours.push(parse_num(&rec[4], "effective_hours")?);
        }
    }
    Ok(ResultTable { factors, rows })
}

/// Dense row-major grid, one CSV line per grid row, no header.
pub fn heatmap_csv(h: &Heatmap, w: usize) -> String {
    let mut out = String::new();
    for row in h.grids[w].chunks(h.width as usize) {
        out.push_str(&row.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn flows_csv(f: &FlowMatrix) -> String {
    let header = strings(&["window", "from", "to", "count"]);
    let mut rows = Vec::new();
    for (w, m) in f.counts.iter().enumerate() {
        for from in IntentionLabel::ALL {
            for to in IntentionLabel::ALL {
                let c = m[from.index()][to.index()];
                if c > 0 {
                    rows.push(vec![w.to_string(), from.name().into(), to.name().into(), c.to_string()]);
                }
            }
        }
    }
    csv_text(&header, rows)
}

pub fn shares_csv(f: &FlowMatrix) -> String {
    let mut header = strings(&["window", "start", "end"]);
    header.extend(IntentionLabel::ALL.iter().map(|l| l.name().to_string()));
    let rows = f.windows.iter().zip(&f.shares).enumerate().map(|(w, ((s, e), sh))| {
        let mut row = vec![w.to_string(), s.to_string(), e.to_string()];
        row.extend(sh.iter().map(|x| fmt_num(*x)));
        row
    });
    csv_text(&header, rows)
}

pub fn coefficients_csv(p: &PathCoefficients) -> String {
    let rows =
        p.factors.iter().zip(&p.beta).zip(&p.p_values).map(|((f, b), q)| vec![f.clone(), fmt_num(*b), fmt_num(*q)]);
    csv_text(&strings(&["factor", "beta", "p"]), rows)
}

pub fn correlations_csv(c: &CorrelationMatrix) -> String {
    let mut header = strings(&["intention"]);
    header.extend(c.behaviors.iter().map(|b| b.name().to_string()));
    let rows = c.intentions.iter().zip(&c.r).map(|(i, r)| {
        let mut row = vec![i.name().to_string()];
        row.extend(r.iter().map(|x| opt_num(*x)));
        row
    });
    csv_text(&header, rows)
}

pub fn clusters_csv(c: &Clustering) -> String {
    let rows = c.assignments.iter().enumerate().map(|(i, a)| vec![i.to_string(), a.to_string()]);
    csv_text(&strings(&["rider", "cluster"]), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub engine_version: String,
    pub files: Vec<String>,
    /// Excluded from byte comparisons: it is the one field that varies between runs.
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: Option<u64>, files: Vec<String>, wall_time_s: f64) -> Self {
        Self { config_hash, seed, engine_version: env!("CARGO_PKG_VERSION").into(), files, wall_time_s }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write(dir, "manifest.json", &(json + "\n"))
    }
}

/// Writes named text artifacts into `dir`, creating it if needed; returns the names written.
pub fn write_artifacts(dir: &Path, files: &[(String, String)]) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (name, contents) in files {
        write(dir, name, contents)?;
    }
    Ok(files.iter().map(|(n, _)| n.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt_num(123456789.0), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(0.00001234), "1.234e-05");
        assert_eq!(fmt_num(999999999.6), "1e+09");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn trace_round_trip() {
        let rec = StepRecord {
            step: 0,
            created: vec![0, 1],
            assigned: vec![(0, 3)],
            delivered: vec![],
            expired: vec![1],
            riders: vec![RiderStep {
                behavior: Behavior::Accept,
                intention: IntentionLabel::Anxious,
                position: Cell::new(2, 5),
                income: 2.5,
                cost: 0.03,
            }],
        };
        let trace = RunTrace { steps: vec![rec.clone()], summary: RunSummary::default() };
        let text = trace_jsonl(&trace);
        assert_eq!(
            text,
            "{\"step\":0,\"created\":[0,1],\"assigned\":[[0,3]],\"delivered\":[],\"expired\":[1],\"riders\":[[\"a\",\"A\",2,5,2.5,0.03]]}\n"
        );
        assert_eq!(read_trace_jsonl(&text).unwrap().steps, vec![rec]);
        assert!(read_trace_jsonl("{\"step\":0}").is_err());
    }

    #[test]
    fn results_round_trip() {
        let row = |point, seed, level: Level, x: f64| ResultRow {
            point,
            replicate: seed as u32,
            seed,
            levels: vec![level],
            involution_index: x,
            swf: 2.0 * x,
            mean_utility: 0.5,
            frac_risk_avoidant: 0.25,
            daily_index: vec![Some(x), None],
            daily_effective_hours: vec![1.5, 2.0],
            error: None,
        };
        let table = ResultTable {
            factors: vec!["order_volume".into()],
            rows: vec![row(0, 0, Level::Number(0.5), 70.0), row(1, 0, Level::Label("high".into()), f64::NAN)],
        };
        let text = results_csv(&table);
        assert!(text.starts_with(
            "design_point,seed,factor_order_volume,involution_index,swf,mean_utility,frac_risk_avoidant\n0,0,0.5,70,140,0.5,0.25\n"
        ));
        let back = read_results(&text, Some(&series_csv(&table))).unwrap();
        assert_eq!(back.factors, table.factors);
        assert_eq!(back.rows[0], table.rows[0]);
        assert!(back.rows[1].involution_index.is_nan());
        assert_eq!(back.rows[1].levels, table.rows[1].levels);
    }

    #[test]
    fn flows_skip_empty_cells() {
        let f = FlowMatrix {
            windows: vec![(0, 4), (4, 8), (8, 12)],
            counts: vec![[[0, 0, 0], [0, 1, 0], [0, 0, 0]], [[0, 0, 0], [0, 0, 1], [0, 0, 0]]],
            label_steps: vec![[0, 4, 0], [0, 4, 0], [0, 0, 4]],
            shares: vec![[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
        assert_eq!(flows_csv(&f), "window,from,to,count\n0,anxious,anxious,1\n1,anxious,risk_avoidant,1\n");
    }

    #[test]
    fn heatmap_layout() {
        let h = Heatmap { width: 3, height: 2, window: 1, grids: vec![vec![1, 2, 3, 4, 5, 6]] };
        assert_eq!(heatmap_csv(&h, 0), "1,2,3\n4,5,6\n");
    }
}
