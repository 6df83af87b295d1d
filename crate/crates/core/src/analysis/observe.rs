use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ResultTable;
use crate::metrics::{classify_involution, InvolutionLevel};
use crate::sim::RunTrace;

pub const DEFAULT_ROBUST_Z: f64 = 3.5;

/// Scale that makes the MAD consistent with the standard deviation under normality.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvolutionDistribution {
    /// Runs per level, in `InvolutionLevel::ALL` order.
    pub counts: [usize; 3],
    /// Runs whose index is undefined.
    pub undefined: usize,
    pub fraction_high: f64,
    /// Per-run index at each day end.
    pub series: Vec<Vec<Option<f64>>>,
}

impl InvolutionDistribution {
    pub fn count(&self, level: InvolutionLevel) -> usize {
        self.counts[level as usize]
    }

    pub fn runs(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.undefined
    }
}

pub fn involution_distribution(results: &ResultTable) -> Result<InvolutionDistribution> {
    if results.rows.is_empty() {
        return Err(Error::Empty("result table"));
    }
    let mut counts = [0; 3];
    let mut undefined = 0;
    for r in &results.rows {
        if r.involution_index.is_finite() {
            counts[classify_involution(r.involution_index) as usize] += 1;
        } else {
            undefined += 1;
        }
    }
    Ok(InvolutionDistribution {
        counts,
        undefined,
        fraction_high: counts[InvolutionLevel::High as usize] as f64 / results.rows.len() as f64,
        series: results.rows.iter().map(|r| r.daily_index.clone()).collect(),
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Indices of values with robust z-score above `threshold`. When the MAD is
/// zero every value that differs from the median is flagged. Non-finite
/// values are skipped.
pub fn robust_outliers(values: &[f64], threshold: f64) -> Result<Vec<usize>> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 4 {
        return Err(Error::domain(format!("anomaly detection needs at least 4 runs, got {}", finite.len())));
    }
    finite.sort_by(f64::total_cmp);
    let med = median(&finite);
    let mut dev: Vec<f64> = finite.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = median(&dev);
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .filter(|(_, &v)| if mad == 0.0 { v != med } else { (v - med).abs() / (MAD_SCALE * mad) > threshold })
        .map(|(i, _)| i)
        .collect())
}

/// Row indices of runs whose involution index is a robust outlier.
pub fn detect_anomalies(results: &ResultTable, threshold: f64) -> Result<Vec<usize>> {
    let values: Vec<f64> = results.rows.iter().map(|r| r.involution_index).collect();
    robust_outliers(&values, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: u32,
    pub height: u32,
    pub window: u32,
    /// One row-major `height x width` grid of rider-step counts per window.
    pub grids: Vec<Vec<u64>>,
}

impl Heatmap {
    pub fn total(&self, w: usize) -> u64 {
        self.grids[w].iter().sum()
    }
}

pub fn density_heatmap(trace: &RunTrace, width: u32, height: u32, window: u32) -> Result<Heatmap> {
    let horizon = trace.steps.len() as u32;
    if window == 0 || !horizon.is_multiple_of(window) {
        return Err(Error::domain(format!("window {window} must divide the horizon {horizon}")));
    }
    let cells = (width * height) as usize;
    let mut grids = vec![vec![0u64; cells]; (horizon / window) as usize];
    for rec in &trace.steps {
        let grid = &mut grids[(rec.step / window) as usize];
        for r in &rec.riders {
            let (x, y) = (r.position.x, r.position.y);
            if x >= width || y >= height {
                return Err(Error::domain(format!("position ({x},{y}) outside a {width}x{height} grid")));
            }
            grid[(y * width + x) as usize] += 1;
        }
    }
    Ok(Heatmap { width, height, window, grids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ResultRow;
    use crate::grid::Cell;
    use crate::metrics::InvolutionLevel;
    use crate::sim::{Behavior, RiderStep, RunTrace, StepRecord};

    pub(crate) fn table(indices: &[f64]) -> ResultTable {
        ResultTable {
            factors: Vec::new(),
            rows: indices
                .iter()
                .enumerate()
                .map(|(i, &x)| ResultRow {
                    point: 0,
                    replicate: i as u32,
                    seed: i as u64,
                    levels: Vec::new(),
                    involution_index: x,
                    swf: 0.0,
                    mean_utility: 1.0,
                    frac_risk_avoidant: 0.0,
                    daily_index: vec![Some(x)],
                    daily_effective_hours: Vec::new(),
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn distribution_counts() {
        let d = involution_distribution(&table(&[72.0, 72.0, 72.0, 25.0])).unwrap();
        assert_eq!(d.count(InvolutionLevel::High), 3);
        assert_eq!(d.count(InvolutionLevel::Low), 1);
        assert_eq!(d.fraction_high, 0.75);
        assert_eq!(d.runs(), 4);
        assert_eq!(involution_distribution(&table(&[10.0; 5])).unwrap().fraction_high, 0.0);
        assert!(involution_distribution(&table(&[])).is_err());
    }

    #[test]
    fn undefined_runs_are_counted_separately() {
        let d = involution_distribution(&table(&[f64::NAN, 45.0])).unwrap();
        assert_eq!(d.undefined, 1);
        assert_eq!(d.count(InvolutionLevel::Moderate), 1);
        assert_eq!(d.runs(), 2);
    }

    #[test]
    fn anomaly_examples() {
        assert_eq!(robust_outliers(&[10.0, 11.0, 9.0, 100.0], DEFAULT_ROBUST_Z).unwrap(), [3]);
        // median 10.5, MAD 1: robust z of the outlier is 89.5 / 1.4826.
        assert!((89.5f64 / 1.4826 - 60.37).abs() < 0.01);
        assert!(robust_outliers(&[10.0; 4], DEFAULT_ROBUST_Z).unwrap().is_empty());
        assert_eq!(robust_outliers(&[10.0, 10.0, 10.0, 11.0], DEFAULT_ROBUST_Z).unwrap(), [3]);
        assert!(robust_outliers(&[1.0, 2.0, 3.0], DEFAULT_ROBUST_Z).is_err());
        assert_eq!(detect_anomalies(&table(&[10.0, 11.0, 9.0, 100.0]), DEFAULT_ROBUST_Z).unwrap(), [3]);
    }

    fn parked(positions: &[Cell], steps: u32) -> RunTrace {
        let rec = |step| StepRecord {
            step,
            created: Vec::new(),
            assigned: Vec::new(),
            delivered: Vec::new(),
            expired: Vec::new(),
            riders: positions
                .iter()
                .map(|&position| RiderStep {
                    behavior: Behavior::Off,
                    intention: crate::agents::IntentionLabel::RuleFollowing,
                    position,
                    income: 0.0,
                    cost: 0.0,
                })
                .collect(),
        };
        let summary = crate::sim::RunSummary { n_riders: positions.len(), horizon: steps, ..Default::default() };
        RunTrace { steps: (0..steps).map(rec).collect(), summary }
    }

    #[test]
    fn heatmap_parked_riders() {
        let trace = parked(&[Cell::new(3, 4); 5], 20);
        let h = density_heatmap(&trace, 10, 10, 10).unwrap();
        assert_eq!(h.grids.len(), 2);
        for g in &h.grids {
            assert_eq!(g[4 * 10 + 3], 50);
            assert_eq!(g.iter().sum::<u64>(), 50);
        }
    }

    #[test]
    fn heatmap_split() {
        let trace = parked(&[Cell::new(0, 0), Cell::new(9, 9)], 10);
        let h = density_heatmap(&trace, 10, 10, 5).unwrap();
        assert_eq!(h.grids[0][0], 5);
        assert_eq!(h.grids[0][99], 5);
        assert!(density_heatmap(&trace, 10, 10, 3).is_err());
        assert!(density_heatmap(&trace, 10, 10, 0).is_err());
    }
}
