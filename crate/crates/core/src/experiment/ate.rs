use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

pub const DEFAULT_BOOTSTRAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Difference in means with a seeded percentile-bootstrap 95% interval.
pub fn ate(treated: &[f64], control: &[f64], bootstrap: usize, seed: u64) -> Result<AteEstimate> {
    if treated.is_empty() {
        return Err(Error::Empty("treated group"));
    }
    if control.is_empty() {
        return Err(Error::Empty("control group"));
    }
    if bootstrap == 0 {
        return Err(Error::domain("bootstrap replicates must be >= 1"));
    }
    let estimate = mean(treated) - mean(control);
    let mut rng = substream(seed, Stream::Bootstrap);
    let mut resample_mean = |xs: &[f64]| {
        let n = xs.len();
        (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64
    };
    let mut diffs: Vec<f64> = (0..bootstrap).map(|_| resample_mean(treated) - resample_mean(control)).collect();
    diffs.sort_by(f64::total_cmp);
    Ok(AteEstimate { estimate, ci_low: quantile(&diffs, 0.025), ci_high: quantile(&diffs, 0.975) })
}
