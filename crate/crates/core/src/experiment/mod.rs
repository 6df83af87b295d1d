//! Factorial designs, replicated execution, treatment effects, surrogates and the emergence tree.

mod ate;
mod emergence;
mod metamodel;

use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use ate::{ate, quantile, AteEstimate, DEFAULT_BOOTSTRAP};
pub use emergence::{emergence_probability, EmergenceOutcome, EmergenceTree};
pub use metamodel::{fit_metamodel, predict, Metamodel, Prediction, Term};

use crate::agents::level_code;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sim::{run_summary, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Number(f64),
    Label(String),
}

impl Level {
    /// Numeric coding used by regressions; labels map through the factor vocabularies.
    pub fn code(&self) -> Option<f64> {
        match self {
            Level::Number(x) => Some(*x),
            Level::Label(s) => level_code(s).or_else(|| s.parse().ok()),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Number(x) => write!(f, "{}", crate::export::fmt_num(*x)),
            Level::Label(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Level {
    fn from(x: f64) -> Self {
        Level::Number(x)
    }
}

impl From<&str> for Level {
    fn from(s: &str) -> Self {
        Level::Label(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Controllable,
    Uncontrollable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<Level>,
    #[serde(default)]
    pub role: Role,
}

impl FactorSpec {
    pub fn new(name: &str, levels: Vec<Level>) -> Self {
        Self { name: name.to_string(), levels, role: Role::Controllable }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    /// Index of the factor-level combination.
    pub point: usize,
    pub replicate: u32,
    pub seed: u64,
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub factors: Vec<FactorSpec>,
    pub replicates: u32,
    pub base_seed: u64,
    pub rows: Vec<DesignRow>,
}

impl DesignMatrix {
    pub fn factor_names(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.name.clone()).collect()
    }

    pub fn n_points(&self) -> usize {
        self.factors.iter().map(|f| f.levels.len()).product()
    }
}

pub(crate) fn check_factors(factors: &[FactorSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for f in factors {
        if f.levels.is_empty() {
            return Err(Error::Config(format!("factor '{}' has no levels", f.name)));
        }
        if !seen.insert(f.name.as_str()) {
            return Err(Error::Config(format!("duplicate factor name '{}'", f.name)));
        }
    }
    Ok(())
}

/// Full factorial cross; the first factor varies slowest, replicates fastest.
/// Replicate `k` of every point runs with seed `base_seed + k`.
pub fn build_design(factors: &[FactorSpec], replicates: u32, base_seed: u64) -> Result<DesignMatrix> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be >= 1".into()));
    }
    check_factors(factors)?;
    let points: usize = factors.iter().map(|f| f.levels.len()).product();
    let mut rows = Vec::with_capacity(points * replicates as usize);
    for point in 0..points {
        let mut rem = point;
        let mut idx = vec![0; factors.len()];
        for (slot, f) in idx.iter_mut().zip(factors).rev() {
            *slot = rem % f.levels.len();
            rem /= f.levels.len();
        }
        let levels: Vec<Level> = factors.iter().zip(&idx).map(|(f, &i)| f.levels[i].clone()).collect();
        for k in 0..replicates {
            rows.push(DesignRow {
                point,
                replicate: k,
                seed: base_seed.wrapping_add(k as u64),
                levels: levels.clone(),
            });
        }
    }
    Ok(DesignMatrix { factors: factors.to_vec(), replicates, base_seed, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub point: usize,
    pub replicate: u32,
    pub seed: u64,
    pub levels: Vec<Level>,
    /// NaN when undefined or when the run failed.
    pub involution_index: f64,
    pub swf: f64,
    pub mean_utility: f64,
    pub frac_risk_avoidant: f64,
    pub daily_index: Vec<Option<f64>>,
    pub daily_effective_hours: Vec<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    fn from_summary(row: &DesignRow, s: &RunSummary) -> Self {
        Self {
            point: row.point,
            replicate: row.replicate,
            seed: row.seed,
            levels: row.levels.clone(),
            involution_index: s.involution_index.unwrap_or(f64::NAN),
            swf: s.welfare.map_or(f64::NAN, |w| w.swf),
            mean_utility: s.mean_utility,
            frac_risk_avoidant: s.frac_risk_avoidant,
            daily_index: s.daily_index.clone(),
            daily_effective_hours: s.daily_effective_hours.clone(),
            error: s.involution_note.clone(),
        }
    }

    fn failed(row: &DesignRow, reason: String) -> Self {
        Self {
            point: row.point,
            replicate: row.replicate,
            seed: row.seed,
            levels: row.levels.clone(),
            involution_index: f64::NAN,
            swf: f64::NAN,
            mean_utility: f64::NAN,
            frac_risk_avoidant: f64::NAN,
            daily_index: Vec::new(),
            daily_effective_hours: Vec::new(),
            error: Some(reason),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "involution_index" => self.involution_index,
            "swf" => self.swf,
            "mean_utility" => self.mean_utility,
            "frac_risk_avoidant" => self.frac_risk_avoidant,
            _ => return None,
        })
    }
}

pub const METRICS: [&str; 4] = ["involution_index", "swf", "mean_utility", "frac_risk_avoidant"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub factors: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.factors.iter().position(|f| f == name).ok_or_else(|| Error::domain(format!("unknown factor '{name}'")))
    }

    /// Metric column; unknown names are an error.
    pub fn column(&self, metric: &str) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.metric(metric).ok_or_else(|| Error::domain(format!("unknown metric '{metric}'"))))
            .collect()
    }

    /// Numeric codes of one factor's levels.
    pub fn factor_codes(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.factor_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                r.levels[j].code().ok_or_else(|| {
                    Error::domain(format!("factor '{name}' level '{}' has no numeric code", r.levels[j]))
                })
            })
            .collect()
    }
}

fn run_row(template: &RunConfig, factors: &[FactorSpec], row: &DesignRow) -> ResultRow {
    let mut cfg = template.clone();
    let outcome = factors
        .iter()
        .zip(&row.levels)
        .try_for_each(|(f, l)| cfg.apply_factor(&f.name, l))
        .and_then(|()| cfg.validate())
        .and_then(|()| run_summary(&cfg, row.seed));
    match outcome {
        Ok(s) => ResultRow::from_summary(row, &s),
        Err(e) => {
            log::warn!("design point {} seed {} failed: {e}", row.point, row.seed);
            ResultRow::failed(row, e.to_string())
        }
    }
}

/// Runs every design row on up to `parallelism` threads; output keeps design order.
pub fn execute_design(design: &DesignMatrix, template: &RunConfig, parallelism: usize) -> ResultTable {
    let n = design.rows.len();
    let workers = parallelism.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ResultRow>>> = Mutex::new(vec![None; n]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let row = run_row(template, &design.factors, &design.rows[i]);
                log::debug!("finished design row {i}");
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    let rows =
        slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every row was claimed")).collect();
    ResultTable { factors: design.factor_names(), rows }
}
